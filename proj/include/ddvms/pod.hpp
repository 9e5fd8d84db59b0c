// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_POD_HPP
#define DDVMS_POD_HPP

#include <cmath>

#include "ddvms/fe1d.hpp"
#include "ddvms/snapshots.hpp"

//
// L^2-orthonormal POD basis. With the mass matrix factored as M = L L^T, the thin SVD
// L^T S = U Sigma V^T gives modes Phi = L^{-T} U, so Phi^T M Phi = U^T U = I holds to the
// orthogonality of U and does not degrade for trailing modes.
//
namespace ddvms::pod
{

struct RankPolicy
{
  enum class Kind
  {
    all,
    max_rank,
    energy_fraction,
  };
  Kind kind = Kind::all;
  Index max_rank = 0;
  double energy_fraction = 1.0;
  // sigma_i / sigma_1 must exceed this to count toward the numerical rank.
  double rel_threshold = 1e-12;

  static RankPolicy all_modes() { return {}; }
  static RankPolicy capped(Index k) { return {Kind::max_rank, k, 1.0, 1e-12}; }
  static RankPolicy energy(double theta) { return {Kind::energy_fraction, 0, theta, 1e-12}; }
};

template <typename Scalar>
struct PodBasis
{
  Matrix<Scalar> modes;             // n_dof x d
  Vector<Scalar> singular_values;   // d, nonincreasing
  Vector<Scalar> all_singular_values;
  double rel_threshold = 1e-12;

  Index rank() const { return modes.cols(); }
};

// Lower bidiagonal Cholesky factor of a symmetric tridiagonal matrix: L(i,i) = diag(i),
// L(i+1,i) = sub(i).
template <typename Scalar>
struct BidiagonalCholesky
{
  Vector<Scalar> diag;
  Vector<Scalar> sub;

  explicit BidiagonalCholesky(const fe1d::SymTridiagonal<Scalar> &A)
  {
    using std::sqrt;
    const Index n = A.size();
    diag.resize(n);
    sub.resize(n > 0 ? n - 1 : 0);
    Scalar prev(0);
    for (Index i = 0; i < n; ++i)
    {
      const Scalar s = i > 0 ? A.off(i - 1) / diag(i - 1) : Scalar(0);
      if (i > 0)
      {
        sub(i - 1) = s;
      }
      prev = A.diag(i) - s * s;
      if (!(prev > Scalar(0)))
      {
        throw NumericalError("POD: inner-product matrix is not positive definite (pivot " +
                             std::to_string(i) + ")");
      }
      diag(i) = sqrt(prev);
    }
  }

  // L^T X
  Matrix<Scalar> apply_transpose(const Matrix<Scalar> &X) const
  {
    const Index n = diag.size();
    Matrix<Scalar> Y = diag.asDiagonal() * X;
    if (n > 1)
    {
      Y.topRows(n - 1) += sub.asDiagonal() * X.bottomRows(n - 1);
    }
    return Y;
  }

  // L^{-T} X by back substitution.
  Matrix<Scalar> solve_transpose(const Matrix<Scalar> &X) const
  {
    const Index n = diag.size();
    Matrix<Scalar> Y(X.rows(), X.cols());
    Y.row(n - 1) = X.row(n - 1) / diag(n - 1);
    for (Index i = n - 2; i >= 0; --i)
    {
      Y.row(i) = (X.row(i) - sub(i) * Y.row(i + 1)) / diag(i);
    }
    return Y;
  }
};

template <typename Scalar>
PodBasis<Scalar> compute_pod(const Matrix<Scalar> &snapshots, const fe1d::SymTridiagonal<Scalar> &mass,
                             const RankPolicy &policy = RankPolicy::all_modes())
{
  if (snapshots.cols() < 2)
  {
    throw DimensionError("compute_pod: at least 2 snapshots required");
  }
  if (snapshots.rows() != mass.size())
  {
    throw DimensionError("compute_pod: snapshot dimension != inner-product dimension");
  }
  const BidiagonalCholesky<Scalar> chol(mass);
  const Matrix<Scalar> weighted = chol.apply_transpose(snapshots);
  Eigen::BDCSVD<Matrix<Scalar>> svd(weighted, Eigen::ComputeThinU);
  const Vector<Scalar> sigma = svd.singularValues();
  if (!(sigma(0) > Scalar(0)))
  {
    throw NumericalError("compute_pod: all snapshots are zero");
  }

  Index d = 0;
  while (d < sigma.size() && sigma(d) > Scalar(policy.rel_threshold) * sigma(0))
  {
    ++d;
  }
  switch (policy.kind)
  {
  case RankPolicy::Kind::all:
    break;
  case RankPolicy::Kind::max_rank:
    if (policy.max_rank < 1)
    {
      throw ConfigError("compute_pod: max_rank must be >= 1");
    }
    d = std::min(d, policy.max_rank);
    break;
  case RankPolicy::Kind::energy_fraction:
  {
    if (!(policy.energy_fraction > 0.0 && policy.energy_fraction <= 1.0))
    {
      throw ConfigError("compute_pod: energy fraction must lie in (0, 1]");
    }
    const Scalar total = sigma.head(d).squaredNorm();
    Scalar acc(0);
    Index keep = 0;
    while (keep < d && acc < Scalar(policy.energy_fraction) * total)
    {
      acc += sigma(keep) * sigma(keep);
      ++keep;
    }
    d = std::max<Index>(keep, 1);
    break;
  }
  }

  PodBasis<Scalar> basis;
  basis.rel_threshold = policy.rel_threshold;
  basis.all_singular_values = sigma;
  basis.singular_values = sigma.head(d);
  basis.modes = chol.solve_transpose(svd.matrixU().leftCols(d));
  for (Index j = 0; j < d; ++j)
  {
    Index imax = 0;
    basis.modes.col(j).cwiseAbs().maxCoeff(&imax);
    if (basis.modes(imax, j) < Scalar(0))
    {
      basis.modes.col(j) = -basis.modes.col(j);
    }
  }
  return basis;
}

template <typename Scalar>
PodBasis<Scalar> compute_pod(const SnapshotSet<Scalar> &set, const RankPolicy &policy = RankPolicy::all_modes())
{
  set.validate();
  return compute_pod<Scalar>(set.trajectory.states, set.inner_product.mass, policy);
}

// Row i, column n: (phi_i, u^n) for i < r.
template <typename Scalar>
Matrix<Scalar> project_coefficients(const PodBasis<Scalar> &basis, const Matrix<Scalar> &states,
                                    const fe1d::SymTridiagonal<Scalar> &mass, Index r)
{
  if (r < 1 || r > basis.rank())
  {
    throw ConfigError("project_coefficients: r = " + std::to_string(r) + " outside [1, " +
                      std::to_string(basis.rank()) + "]");
  }
  if (states.rows() != basis.modes.rows())
  {
    throw DimensionError("project_coefficients: state dimension mismatch");
  }
  return basis.modes.leftCols(r).transpose() * mass.apply(states);
}

template <typename Scalar>
Matrix<Scalar> project_coefficients(const PodBasis<Scalar> &basis, const SnapshotSet<Scalar> &set, Index r)
{
  return project_coefficients<Scalar>(basis, set.trajectory.states, set.inner_product.mass, r);
}

// FE coefficient vectors of sum_i coeffs(i, n) phi_i.
template <typename Scalar>
Matrix<Scalar> reconstruct(const PodBasis<Scalar> &basis, const Matrix<Scalar> &coeffs)
{
  if (coeffs.rows() > basis.rank())
  {
    throw DimensionError("reconstruct: more coefficients than modes");
  }
  return basis.modes.leftCols(coeffs.rows()) * coeffs;
}

}  // namespace ddvms::pod

#endif  // DDVMS_POD_HPP
