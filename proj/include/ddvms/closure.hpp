// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_CLOSURE_HPP
#define DDVMS_CLOSURE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ddvms/rom_core.hpp"

//
// Data-driven closure fit. The ansatz A_tilde b^n ~ -tau^n over all snapshots is the linear
// least-squares problem min ||E x - f|| with x = vec(A_tilde) (row-major, x(i r + m) =
// A_tilde(i, m)), E in R^{(M r) x r^2} and f-block n = -tau(:, n).
//
// E never needs to be formed: with rows reordered by component, E = I_r (x) B^T where B is
// the r x M matrix of truth coefficients. If B^T = W S Z^T is its thin SVD then E has the
// singular triplets (s_j, e_i (x) w_j, e_i (x) z_j), each s_j repeated r times. Triplets are
// ordered by j (decreasing s_j) and then by component i, which fixes the basis chosen inside
// each degenerate group and makes truncation at an arbitrary index k deterministic.
//
namespace ddvms::closure
{

template <typename Scalar>
struct LeastSquaresSystem
{
  Index r = 0;
  Matrix<Scalar> truth;  // r x M
  Matrix<Scalar> rhs;    // r x M, column n is the f-block of snapshot n

  Matrix<Scalar> W;      // M x r
  Vector<Scalar> s;      // r, nonincreasing
  Matrix<Scalar> Z;      // r x r
  double cond_EtE = std::numeric_limits<double>::infinity();

  Index snapshots() const { return truth.cols(); }
  Index n_singular() const { return r * r; }

  // Triplet t belongs to component i = t % r and group j = t / r.
  Scalar sigma(Index t) const { return s(t / r); }

  Vector<Scalar> singular_values() const
  {
    Vector<Scalar> out(n_singular());
    for (Index t = 0; t < n_singular(); ++t)
    {
      out(t) = sigma(t);
    }
    return out;
  }

  // Projections g_t = u_t^T f.
  Vector<Scalar> projected_rhs() const
  {
    const Matrix<Scalar> FW = rhs * W;  // r x r, FW(i, j)
    Vector<Scalar> g(n_singular());
    for (Index t = 0; t < n_singular(); ++t)
    {
      g(t) = FW(t % r, t / r);
    }
    return g;
  }

  Scalar rhs_norm_sq() const { return rhs.squaredNorm(); }

  // Dense forms, for inspection and testing at small sizes.
  Matrix<Scalar> dense_E() const
  {
    const Index M = snapshots();
    Matrix<Scalar> E = Matrix<Scalar>::Zero(M * r, r * r);
    for (Index n = 0; n < M; ++n)
    {
      for (Index i = 0; i < r; ++i)
      {
        for (Index m = 0; m < r; ++m)
        {
          E(n * r + i, i * r + m) = truth(m, n);
        }
      }
    }
    return E;
  }

  Vector<Scalar> dense_f() const
  {
    return Eigen::Map<const Vector<Scalar>>(rhs.data(), rhs.size());
  }

  Matrix<Scalar> dense_U() const
  {
    const Index M = snapshots();
    Matrix<Scalar> U = Matrix<Scalar>::Zero(M * r, n_singular());
    for (Index t = 0; t < n_singular(); ++t)
    {
      const Index i = t % r, j = t / r;
      for (Index n = 0; n < M; ++n)
      {
        U(n * r + i, t) = W(n, j);
      }
    }
    return U;
  }

  Matrix<Scalar> dense_V() const
  {
    Matrix<Scalar> V = Matrix<Scalar>::Zero(r * r, n_singular());
    for (Index t = 0; t < n_singular(); ++t)
    {
      const Index i = t % r, j = t / r;
      V.block(i * r, t, r, 1) = Z.col(j);
    }
    return V;
  }
};

template <typename Scalar>
LeastSquaresSystem<Scalar> assemble_system(const Matrix<Scalar> &truth, const rom::ClosureTargets<Scalar> &targets)
{
  if (truth.rows() < 1 || truth.cols() < 1)
  {
    throw DimensionError("assemble_system: degenerate system (M r < 1)");
  }
  if (targets.tau.rows() != truth.rows() || targets.tau.cols() != truth.cols())
  {
    throw DimensionError("assemble_system: targets shape " + std::to_string(targets.tau.rows()) + "x" +
                         std::to_string(targets.tau.cols()) + " != truth shape " + std::to_string(truth.rows()) +
                         "x" + std::to_string(truth.cols()));
  }
  LeastSquaresSystem<Scalar> sys;
  sys.r = truth.rows();
  sys.truth = truth;
  sys.rhs = -targets.tau;

  const Index r = sys.r, M = truth.cols();
  const Matrix<Scalar> Bt = truth.transpose();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(Bt, Eigen::ComputeFullU | Eigen::ComputeFullV);
  sys.s = Vector<Scalar>::Zero(r);
  sys.s.head(svd.singularValues().size()) = svd.singularValues();
  sys.Z = svd.matrixV();
  sys.W = Matrix<Scalar>::Zero(M, r);
  const Index rank = std::min(M, r);
  sys.W.leftCols(rank) = svd.matrixU().leftCols(rank);
  // Columns of W beyond min(M, r) belong to zero singular values and are left at zero.
  const double smax = static_cast<double>(sys.s(0));
  const double smin = static_cast<double>(sys.s(r - 1));
  sys.cond_EtE = smin > 0.0 ? (smax / smin) * (smax / smin) : std::numeric_limits<double>::infinity();
  return sys;
}

// Rank-k truncation: the k leading singular triplets of E.
template <typename Scalar>
struct RegularizedSystem
{
  const LeastSquaresSystem<Scalar> *system = nullptr;
  Index k = 0;

  Index r() const { return system->r; }

  Matrix<Scalar> dense() const
  {
    const Matrix<Scalar> U = system->dense_U().leftCols(k);
    const Matrix<Scalar> V = system->dense_V().leftCols(k);
    return U * system->singular_values().head(k).asDiagonal() * V.transpose();
  }

  // min_x ||E_k x - f|| = ||(I - U_k U_k^T) f||.
  Scalar unconstrained_residual() const
  {
    const Vector<Scalar> g = system->projected_rhs();
    using std::sqrt;
    return sqrt(std::max(Scalar(0), system->rhs_norm_sq() - g.head(k).squaredNorm()));
  }

  // Minimum-norm unconstrained solution V_k S_k^{-1} U_k^T f, as a matrix.
  Matrix<Scalar> unconstrained_solution() const
  {
    const Index n = r();
    const Vector<Scalar> g = system->projected_rhs();
    Matrix<Scalar> At = Matrix<Scalar>::Zero(n, n);
    for (Index t = 0; t < k; ++t)
    {
      const Index i = t % n, j = t / n;
      if (system->s(j) > Scalar(0))
      {
        At.row(i) += (g(t) / system->s(j)) * system->Z.col(j).transpose();
      }
    }
    return At;
  }

  // ||E_k vec(A) - f||^2 for an arbitrary r x r matrix.
  Scalar objective(const Matrix<Scalar> &A_tilde) const
  {
    const Index n = r();
    const Matrix<Scalar> AZ = A_tilde * system->Z;
    const Vector<Scalar> g = system->projected_rhs();
    Scalar obj = std::max(Scalar(0), system->rhs_norm_sq() - g.head(k).squaredNorm());
    for (Index t = 0; t < k; ++t)
    {
      const Scalar c = system->sigma(t) * AZ(t % n, t / n) - g(t);
      obj += c * c;
    }
    return obj;
  }
};

template <typename Scalar>
RegularizedSystem<Scalar> truncated_svd(const LeastSquaresSystem<Scalar> &sys, Index k)
{
  if (k < 1 || k > sys.n_singular())
  {
    throw ConfigError("truncated_svd: k = " + std::to_string(k) + " outside [1, " +
                      std::to_string(sys.n_singular()) + "]");
  }
  return RegularizedSystem<Scalar>{&sys, k};
}

//
// Structured parametrization of A_tilde: skew parameters for pairs a < b (row-major order)
// followed by one parameter per diagonal entry. Off-diagonal columns carry 1/sqrt(2) so the
// map y -> vec(A_tilde) has orthonormal columns and ||y|| = ||A_tilde||_F.
//
template <typename Scalar>
struct SkewDiagonalMap
{
  Index r = 0;

  Index n_skew() const { return r * (r - 1) / 2; }
  Index n_params() const { return n_skew() + r; }

  Matrix<Scalar> to_matrix(const Vector<Scalar> &y) const
  {
    const Scalar c = Scalar(1) / std::sqrt(Scalar(2));
    Matrix<Scalar> A = Matrix<Scalar>::Zero(r, r);
    Index q = 0;
    for (Index a = 0; a < r; ++a)
    {
      for (Index b = a + 1; b < r; ++b, ++q)
      {
        A(a, b) = c * y(q);
        A(b, a) = -A(a, b);
      }
    }
    for (Index i = 0; i < r; ++i)
    {
      A(i, i) = y(n_skew() + i);
    }
    return A;
  }
};

// Bounded-variable least squares result for min ||A z - b||, z >= 0.
template <typename Scalar>
struct NnlsResult
{
  Vector<Scalar> z;
  int iterations = 0;
  bool converged = false;
};

//
// Lawson-Hanson active-set NNLS. Passive-set subproblems use a complete orthogonal
// decomposition, so rank-deficient columns receive the minimum-norm solution and never
// enter with a nonzero multiplier.
//
template <typename Scalar>
NnlsResult<Scalar> nnls(const Matrix<Scalar> &A, const Vector<Scalar> &b, int max_iter, Scalar grad_tol)
{
  const Index n = A.cols();
  NnlsResult<Scalar> res;
  res.z = Vector<Scalar>::Zero(n);
  std::vector<bool> passive(n, false), excluded(n, false);

  auto solve_passive = [&](Vector<Scalar> &s) {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j)
    {
      if (passive[j])
      {
        idx.push_back(j);
      }
    }
    s = Vector<Scalar>::Zero(n);
    if (idx.empty())
    {
      return;
    }
    Matrix<Scalar> Ap(A.rows(), static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c)
    {
      Ap.col(static_cast<Index>(c)) = A.col(idx[c]);
    }
    const Vector<Scalar> sp = Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>>(Ap).solve(b);
    for (std::size_t c = 0; c < idx.size(); ++c)
    {
      s(idx[c]) = sp(static_cast<Index>(c));
    }
  };

  const Scalar tiny = Eigen::NumTraits<Scalar>::epsilon() * Scalar(1e2);
  while (res.iterations < max_iter)
  {
    const Vector<Scalar> w = A.transpose() * (b - A * res.z);
    Index jmax = -1;
    Scalar wmax = grad_tol;
    for (Index j = 0; j < n; ++j)
    {
      if (!passive[j] && !excluded[j] && w(j) > wmax)
      {
        wmax = w(j);
        jmax = j;
      }
    }
    if (jmax < 0)
    {
      res.converged = true;
      return res;
    }
    passive[jmax] = true;
    std::fill(excluded.begin(), excluded.end(), false);

    bool first = true;
    while (true)
    {
      ++res.iterations;
      if (res.iterations > max_iter)
      {
        return res;
      }
      Vector<Scalar> s;
      solve_passive(s);
      bool feasible = true;
      for (Index j = 0; j < n; ++j)
      {
        if (passive[j] && s(j) <= Scalar(0))
        {
          feasible = false;
        }
      }
      if (feasible)
      {
        res.z = s;
        break;
      }
      if (first && s(jmax) <= Scalar(0))
      {
        // The entering column cannot move off its bound (roundoff in w); skip it.
        passive[jmax] = false;
        excluded[jmax] = true;
        break;
      }
      first = false;
      Scalar alpha(1);
      for (Index j = 0; j < n; ++j)
      {
        if (passive[j] && s(j) <= Scalar(0))
        {
          alpha = std::min(alpha, res.z(j) / (res.z(j) - s(j)));
        }
      }
      res.z += alpha * (s - res.z);
      for (Index j = 0; j < n; ++j)
      {
        if (passive[j] && res.z(j) <= tiny * std::max(Scalar(1), res.z.cwiseAbs().maxCoeff()))
        {
          passive[j] = false;
          res.z(j) = Scalar(0);
        }
      }
    }
  }
  return res;
}

enum class SolverStatus
{
  converged,
  failed,
};

template <typename Scalar>
struct ClosureMatrix
{
  Matrix<Scalar> A_tilde;
  Index k = 0;
  Vector<Scalar> residual_sq_per_snapshot;  // ||A_tilde b^n - f^n||^2 against the unregularized data
  SolverStatus status = SolverStatus::failed;
  std::string failure_reason;
  int iterations = 0;
  double kkt_residual = 0.0;
  double objective = 0.0;  // regularized objective ||E_k x - f||^2

  bool ok() const { return status == SolverStatus::converged; }
};

struct SolverSettings
{
  int max_iterations = 1000;
  double kkt_tolerance = 1e-9;
};

template <typename Scalar>
Vector<Scalar> residuals_per_snapshot(const LeastSquaresSystem<Scalar> &sys, const Matrix<Scalar> &A_tilde)
{
  return (A_tilde * sys.truth - sys.rhs).colwise().squaredNorm().transpose();
}

//
// min ||E_k vec(A_tilde) - f||^2 subject to A_tilde(i, j) = -A_tilde(j, i) for i != j and
// A_tilde(i, i) <= 0. The skew parameters are unconstrained and are eliminated by projecting
// onto the orthogonal complement of their columns; the remaining r diagonal parameters solve
// a small NNLS problem in z = -diag.
//
template <typename Scalar>
ClosureMatrix<Scalar> solve_constrained(const RegularizedSystem<Scalar> &reg, const SolverSettings &settings = {})
{
  const LeastSquaresSystem<Scalar> &sys = *reg.system;
  const Index r = sys.r, k = reg.k;
  const SkewDiagonalMap<Scalar> map{r};
  const Index p = map.n_params(), nf = map.n_skew();
  const Scalar c = Scalar(1) / std::sqrt(Scalar(2));

  // C = S_k V_k^T P, g = U_k^T f.
  Matrix<Scalar> C = Matrix<Scalar>::Zero(k, p);
  for (Index t = 0; t < k; ++t)
  {
    const Index i = t % r, j = t / r;
    const Scalar sj = sys.s(j);
    Index q = 0;
    for (Index a = 0; a < r; ++a)
    {
      for (Index b = a + 1; b < r; ++b, ++q)
      {
        if (i == a)
        {
          C(t, q) = sj * c * sys.Z(b, j);
        }
        else if (i == b)
        {
          C(t, q) = -sj * c * sys.Z(a, j);
        }
      }
    }
    C(t, nf + i) = sj * sys.Z(i, j);
  }
  const Vector<Scalar> g = sys.projected_rhs().head(k);

  const Matrix<Scalar> Cf = C.leftCols(nf);
  const Matrix<Scalar> Cd = C.rightCols(r);
  Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod;
  Matrix<Scalar> G = Cd;
  Vector<Scalar> h = g;
  if (nf > 0)
  {
    cod.compute(Cf);
    G -= Cf * cod.solve(Cd);
    h -= Cf * cod.solve(g);
  }

  const Scalar scale = std::max((C.transpose() * g).cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());
  const NnlsResult<Scalar> nn = nnls<Scalar>(-G, h, settings.max_iterations, Scalar(1e-13) * scale);

  ClosureMatrix<Scalar> out;
  out.k = k;
  out.iterations = nn.iterations;

  Vector<Scalar> y(p);
  y.tail(r) = -nn.z;
  if (nf > 0)
  {
    y.head(nf) = cod.solve(g - Cd * y.tail(r));
  }
  out.A_tilde = map.to_matrix(y);
  // Diagonal entries are either strictly negative NNLS values or exact zeros.
  out.residual_sq_per_snapshot = residuals_per_snapshot(sys, out.A_tilde);
  out.objective = static_cast<double>(reg.objective(out.A_tilde));

  const Vector<Scalar> grad = C.transpose() * (C * y - g);
  Scalar kkt(0);
  for (Index q = 0; q < nf; ++q)
  {
    kkt = std::max(kkt, std::abs(grad(q)));
  }
  for (Index i = 0; i < r; ++i)
  {
    const Scalar gi = grad(nf + i);
    kkt = std::max(kkt, y(nf + i) < Scalar(0) ? std::abs(gi) : std::max(Scalar(0), gi));
  }
  out.kkt_residual = static_cast<double>(kkt / scale);

  if (!nn.converged)
  {
    out.status = SolverStatus::failed;
    out.failure_reason = "max_iterations";
  }
  else if (!(out.kkt_residual <= settings.kkt_tolerance))
  {
    out.status = SolverStatus::failed;
    out.failure_reason = "kkt_residual=" + std::to_string(out.kkt_residual);
  }
  else if (!out.A_tilde.allFinite())
  {
    out.status = SolverStatus::failed;
    out.failure_reason = "non_finite";
  }
  else
  {
    out.status = SolverStatus::converged;
  }
  return out;
}

}  // namespace ddvms::closure

#endif  // DDVMS_CLOSURE_HPP
