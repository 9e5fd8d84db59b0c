// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_ROM_CORE_HPP
#define DDVMS_ROM_CORE_HPP

#include <optional>
#include <vector>

#include "ddvms/fe1d.hpp"
#include "ddvms/pod.hpp"
#include "ddvms/snapshots.hpp"

namespace ddvms::rom
{

// Third-order convection tensor stored as slices: slice(i)(m, k) = B_imk.
template <typename Scalar>
struct ConvectionTensor
{
  std::vector<Matrix<Scalar>> slices;

  Index dim() const { return static_cast<Index>(slices.size()); }

  static ConvectionTensor zero(Index r)
  {
    return ConvectionTensor{std::vector<Matrix<Scalar>>(r, Matrix<Scalar>::Zero(r, r))};
  }

  Scalar operator()(Index i, Index m, Index k) const { return slices[i](m, k); }

  // q_i(a) = a^T B_i a
  Vector<Scalar> apply(const Vector<Scalar> &a) const
  {
    Vector<Scalar> q(dim());
    for (Index i = 0; i < dim(); ++i)
    {
      q(i) = a.dot(slices[i] * a);
    }
    return q;
  }

  // dq/da: row i is a^T (B_i + B_i^T).
  Matrix<Scalar> jacobian(const Vector<Scalar> &a) const
  {
    Matrix<Scalar> J(dim(), dim());
    for (Index i = 0; i < dim(); ++i)
    {
      J.row(i) = (slices[i] * a + slices[i].transpose() * a).transpose();
    }
    return J;
  }

  // Linear map a -> (ext^T B_i a)_i with ext frozen in the convecting slot m.
  Matrix<Scalar> convect(const Vector<Scalar> &ext) const
  {
    Matrix<Scalar> C(dim(), dim());
    for (Index i = 0; i < dim(); ++i)
    {
      C.row(i) = ext.transpose() * slices[i];
    }
    return C;
  }

  ConvectionTensor truncate(Index r) const
  {
    if (r > dim())
    {
      throw DimensionError("ConvectionTensor::truncate: r exceeds tensor dimension");
    }
    ConvectionTensor out;
    out.slices.reserve(r);
    for (Index i = 0; i < r; ++i)
    {
      out.slices.push_back(slices[i].topLeftCorner(r, r));
    }
    return out;
  }
};

template <typename Scalar>
struct RomOperators
{
  Matrix<Scalar> forcing;  // r x M, empty when the problem is unforced
  Matrix<Scalar> A;
  ConvectionTensor<Scalar> B;

  Index dim() const { return A.rows(); }

  Vector<Scalar> forcing_at(Index n) const
  {
    if (forcing.size() == 0)
    {
      return Vector<Scalar>::Zero(dim());
    }
    if (n >= forcing.cols())
    {
      throw DimensionError("RomOperators: forcing has no column " + std::to_string(n));
    }
    return forcing.col(n);
  }

  // Leading r-dimensional sub-blocks.
  RomOperators truncate(Index r) const
  {
    if (r < 1 || r > dim())
    {
      throw ConfigError("RomOperators::truncate: r = " + std::to_string(r) + " outside [1, " +
                        std::to_string(dim()) + "]");
    }
    RomOperators out;
    out.A = A.topLeftCorner(r, r);
    out.B = B.truncate(r);
    if (forcing.size() != 0)
    {
      out.forcing = forcing.topRows(r);
    }
    return out;
  }
};

//
// Galerkin operators: A_im = -diffusivity (grad phi_m, grad phi_i) and
// B_imk = -(phi_m d/dx phi_k, phi_i). `forcing`, when present, holds FE load vectors per
// time step and is projected onto the modes.
//
template <typename Scalar>
RomOperators<Scalar> assemble_rom_operators(const pod::PodBasis<Scalar> &basis, const fe1d::FeOperators<Scalar> &fe,
                                            Index r, double diffusivity,
                                            const std::optional<Matrix<Scalar>> &forcing = std::nullopt)
{
  if (r < 1 || r > basis.rank())
  {
    throw ConfigError("assemble_rom_operators: r = " + std::to_string(r) + " outside [1, " +
                      std::to_string(basis.rank()) + "]");
  }
  const auto Phi = basis.modes.leftCols(r);
  RomOperators<Scalar> ops;
  const Matrix<Scalar> KPhi = fe.stiffness.apply(Phi);
  ops.A = Scalar(-diffusivity) * (Phi.transpose() * KPhi);
  // Exact symmetry of the Gram structure.
  ops.A = (Scalar(0.5) * (ops.A + ops.A.transpose())).eval();

  ops.B.slices.assign(r, Matrix<Scalar>::Zero(r, r));
  for (Index m = 0; m < r; ++m)
  {
    for (Index k = 0; k < r; ++k)
    {
      const Vector<Scalar> bmk = fe1d::trilinear_vector<Scalar>(Phi.col(m), Phi.col(k), fe.mesh);
      const Vector<Scalar> proj = Phi.transpose() * bmk;
      for (Index i = 0; i < r; ++i)
      {
        ops.B.slices[i](m, k) = -proj(i);
      }
    }
  }
  if (forcing)
  {
    if (forcing->rows() != fe.n_dof())
    {
      throw DimensionError("assemble_rom_operators: forcing dimension mismatch");
    }
    ops.forcing = Phi.transpose() * *forcing;
  }
  return ops;
}

// Per-snapshot exact closure projections (tau^FOM(u^n), phi_i).
template <typename Scalar>
struct ClosureTargets
{
  Matrix<Scalar> tau;  // r x M

  Index dim() const { return tau.rows(); }
  Index snapshots() const { return tau.cols(); }
};

//
// tau(i, n) = b(u^n, u^n, phi_i) - b(P_r u^n, P_r u^n, phi_i), evaluated in FE space per
// snapshot. `fom_convection` (columns N(u^n)) does not depend on r and may be reused across
// ranks.
//
template <typename Scalar>
ClosureTargets<Scalar> compute_closure_targets(const SnapshotSet<Scalar> &set, const pod::PodBasis<Scalar> &basis,
                                               Index r, const Matrix<Scalar> &fom_convection)
{
  if (r < 1 || r > basis.rank())
  {
    throw ConfigError("compute_closure_targets: r = " + std::to_string(r) + " outside [1, " +
                      std::to_string(basis.rank()) + "]");
  }
  if (fom_convection.rows() != set.n_dof() || fom_convection.cols() != set.size())
  {
    throw DimensionError("compute_closure_targets: FOM convection shape mismatch");
  }
  const auto Phi = basis.modes.leftCols(r);
  const Matrix<Scalar> b_r = pod::project_coefficients(basis, set, r);
  const Matrix<Scalar> resolved = fe1d::convection_vectors<Scalar>(Phi * b_r, set.inner_product.mesh);
  return ClosureTargets<Scalar>{Phi.transpose() * (fom_convection - resolved)};
}

template <typename Scalar>
ClosureTargets<Scalar> compute_closure_targets(const SnapshotSet<Scalar> &set, const pod::PodBasis<Scalar> &basis,
                                               Index r)
{
  return compute_closure_targets<Scalar>(
      set, basis, r, fe1d::convection_vectors<Scalar>(set.trajectory.states, set.inner_product.mesh));
}

// s^n = -(b^n - a^n)^T A_tilde (b^n - a^n), evaluated through the symmetric part of A_tilde:
// the skew part contributes exactly zero in exact arithmetic and only rounding otherwise.
template <typename Scalar>
Vector<Scalar> mean_dissipativity_audit(const Matrix<Scalar> &A_tilde, const Matrix<Scalar> &truth,
                                        const Matrix<Scalar> &rom)
{
  if (A_tilde.rows() != A_tilde.cols() || truth.rows() != A_tilde.rows() || rom.rows() != truth.rows() ||
      rom.cols() != truth.cols())
  {
    throw DimensionError("mean_dissipativity_audit: shape mismatch");
  }
  const Matrix<Scalar> e = truth - rom;
  const Matrix<Scalar> sym = Scalar(0.5) * (A_tilde + A_tilde.transpose());
  // Adding zero folds -0 into +0 for stable CSV output.
  return (Scalar(0) - e.cwiseProduct(sym * e).colwise().sum().transpose().array()).matrix();
}

}  // namespace ddvms::rom

#endif  // DDVMS_ROM_CORE_HPP
