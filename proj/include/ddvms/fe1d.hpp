// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_FE1D_HPP
#define DDVMS_FE1D_HPP

#include <cmath>

#include "ddvms/types.hpp"

//
// Piecewise-linear finite elements on a uniform mesh of [0,1] with homogeneous Dirichlet
// boundaries. Boundary nodes are eliminated, so coefficient vectors have n_cells - 1 entries
// and entry i is the nodal value at x = (i + 1) h.
//
namespace ddvms::fe1d
{

struct Mesh1D
{
  Index n_cells = 0;
  double h = 0.0;
  Index n_dof = 0;

  static Mesh1D uniform(Index n_cells)
  {
    if (n_cells < 2)
    {
      throw ConfigError("Mesh1D: n_cells must be >= 2, got " + std::to_string(n_cells));
    }
    return Mesh1D{n_cells, 1.0 / static_cast<double>(n_cells), n_cells - 1};
  }

  double node(Index dof) const { return static_cast<double>(dof + 1) * h; }
};

// Symmetric tridiagonal matrix; off(i) couples rows i and i + 1.
template <typename Scalar>
struct SymTridiagonal
{
  Vector<Scalar> diag;
  Vector<Scalar> off;

  Index size() const { return diag.size(); }

  template <typename Derived>
  Vector<Scalar> operator*(const Eigen::MatrixBase<Derived> &x) const
  {
    const Index n = size();
    if (x.size() != n)
    {
      throw DimensionError("SymTridiagonal: vector size " + std::to_string(x.size()) +
                           " != " + std::to_string(n));
    }
    Vector<Scalar> y = diag.cwiseProduct(x);
    if (n > 1)
    {
      y.head(n - 1) += off.cwiseProduct(x.tail(n - 1));
      y.tail(n - 1) += off.cwiseProduct(x.head(n - 1));
    }
    return y;
  }

  // Applies the matrix to every column of X.
  Matrix<Scalar> apply(const Matrix<Scalar> &X) const
  {
    const Index n = size();
    if (X.rows() != n)
    {
      throw DimensionError("SymTridiagonal: matrix rows " + std::to_string(X.rows()) +
                           " != " + std::to_string(n));
    }
    Matrix<Scalar> Y = diag.asDiagonal() * X;
    if (n > 1)
    {
      Y.topRows(n - 1) += off.asDiagonal() * X.bottomRows(n - 1);
      Y.bottomRows(n - 1) += off.asDiagonal() * X.topRows(n - 1);
    }
    return Y;
  }

  Matrix<Scalar> dense() const
  {
    const Index n = size();
    Matrix<Scalar> D = Matrix<Scalar>::Zero(n, n);
    D.diagonal() = diag;
    if (n > 1)
    {
      D.diagonal(1) = off;
      D.diagonal(-1) = off;
    }
    return D;
  }
};

// General tridiagonal matrix (Newton Jacobians).
template <typename Scalar>
struct Tridiagonal
{
  Vector<Scalar> lower;  // lower(i) = A(i + 1, i)
  Vector<Scalar> diag;
  Vector<Scalar> upper;  // upper(i) = A(i, i + 1)

  Index size() const { return diag.size(); }

  Matrix<Scalar> dense() const
  {
    const Index n = size();
    Matrix<Scalar> D = Matrix<Scalar>::Zero(n, n);
    D.diagonal() = diag;
    if (n > 1)
    {
      D.diagonal(1) = upper;
      D.diagonal(-1) = lower;
    }
    return D;
  }
};

// Thomas algorithm. Throws SingularSystem on a vanishing pivot.
template <typename Scalar>
Vector<Scalar> solve(const Tridiagonal<Scalar> &A, const Vector<Scalar> &rhs)
{
  const Index n = A.size();
  if (rhs.size() != n)
  {
    throw DimensionError("tridiagonal solve: rhs size mismatch");
  }
  using std::abs;
  Vector<Scalar> c(n), d(n);
  const Scalar scale = A.diag.cwiseAbs().maxCoeff();
  const Scalar tiny = scale * Eigen::NumTraits<Scalar>::epsilon() * Scalar(1e-3);
  Scalar pivot = A.diag(0);
  if (!(abs(pivot) > tiny))
  {
    throw SingularSystem("tridiagonal solve: zero pivot at row 0");
  }
  c(0) = n > 1 ? A.upper(0) / pivot : Scalar(0);
  d(0) = rhs(0) / pivot;
  for (Index i = 1; i < n; ++i)
  {
    pivot = A.diag(i) - A.lower(i - 1) * c(i - 1);
    if (!(abs(pivot) > tiny))
    {
      throw SingularSystem("tridiagonal solve: zero pivot at row " + std::to_string(i));
    }
    c(i) = i + 1 < n ? A.upper(i) / pivot : Scalar(0);
    d(i) = (rhs(i) - A.lower(i - 1) * d(i - 1)) / pivot;
  }
  for (Index i = n - 2; i >= 0; --i)
  {
    d(i) -= c(i) * d(i + 1);
  }
  return d;
}

template <typename Scalar>
struct FeOperators
{
  Mesh1D mesh;
  SymTridiagonal<Scalar> mass;
  SymTridiagonal<Scalar> stiffness;

  Index n_dof() const { return mass.size(); }
};

template <typename Scalar = double>
FeOperators<Scalar> assemble_fe_operators(const Mesh1D &mesh)
{
  if (mesh.n_cells < 2)
  {
    throw ConfigError("assemble_fe_operators: n_cells must be >= 2");
  }
  const Index n = mesh.n_dof;
  const Scalar h = Scalar(1) / Scalar(mesh.n_cells);
  FeOperators<Scalar> ops;
  ops.mesh = mesh;
  ops.mass.diag = Vector<Scalar>::Constant(n, Scalar(2) * h / Scalar(3));
  ops.mass.off = Vector<Scalar>::Constant(n - 1, h / Scalar(6));
  ops.stiffness.diag = Vector<Scalar>::Constant(n, Scalar(2) / h);
  ops.stiffness.off = Vector<Scalar>::Constant(n - 1, Scalar(-1) / h);
  return ops;
}

namespace detail
{
template <typename Scalar>
void check_size(const Vector<Scalar> &u, Index n, const char *who)
{
  if (u.size() != n)
  {
    throw DimensionError(std::string(who) + ": vector size " + std::to_string(u.size()) +
                         " != n_dof " + std::to_string(n));
  }
}

// Nodal value at full-mesh node `node` (0 and n_cells are the Dirichlet nodes).
template <typename Scalar>
Scalar nodal(const Vector<Scalar> &u, Index node, Index n_cells)
{
  return (node == 0 || node == n_cells) ? Scalar(0) : u(node - 1);
}
}  // namespace detail

template <typename Scalar>
Scalar l2_inner(const Vector<Scalar> &u, const Vector<Scalar> &v, const FeOperators<Scalar> &ops)
{
  detail::check_size(u, ops.n_dof(), "l2_inner");
  detail::check_size(v, ops.n_dof(), "l2_inner");
  return u.dot(ops.mass * v);
}

template <typename Scalar>
Scalar h1_seminorm_sq(const Vector<Scalar> &u, const FeOperators<Scalar> &ops)
{
  detail::check_size(u, ops.n_dof(), "h1_seminorm_sq");
  return u.dot(ops.stiffness * u);
}

//
// Trilinear convection form b(u, v, w) = \int u v_x w dx. On each cell v_x is constant and
// u w is quadratic, so the cell integral is evaluated in closed form (identical to 3-point
// Gauss-Legendre, which is exact for this cubic integrand).
//
template <typename Scalar>
Scalar nonlinear_form(const Vector<Scalar> &u, const Vector<Scalar> &v, const Vector<Scalar> &w,
                      const Mesh1D &mesh)
{
  detail::check_size(u, mesh.n_dof, "nonlinear_form");
  detail::check_size(v, mesh.n_dof, "nonlinear_form");
  detail::check_size(w, mesh.n_dof, "nonlinear_form");
  Scalar total(0);
  for (Index e = 0; e < mesh.n_cells; ++e)
  {
    const Scalar uL = detail::nodal(u, e, mesh.n_cells), uR = detail::nodal(u, e + 1, mesh.n_cells);
    const Scalar vL = detail::nodal(v, e, mesh.n_cells), vR = detail::nodal(v, e + 1, mesh.n_cells);
    const Scalar wL = detail::nodal(w, e, mesh.n_cells), wR = detail::nodal(w, e + 1, mesh.n_cells);
    total += (vR - vL) * (Scalar(2) * uL * wL + uL * wR + uR * wL + Scalar(2) * uR * wR) / Scalar(6);
  }
  return total;
}

// Assembled vector of b(u, v, psi_j) over all interior hat functions psi_j.
template <typename Scalar>
Vector<Scalar> trilinear_vector(const Vector<Scalar> &u, const Vector<Scalar> &v, const Mesh1D &mesh)
{
  detail::check_size(u, mesh.n_dof, "trilinear_vector");
  detail::check_size(v, mesh.n_dof, "trilinear_vector");
  Vector<Scalar> N = Vector<Scalar>::Zero(mesh.n_dof);
  for (Index e = 0; e < mesh.n_cells; ++e)
  {
    const Scalar uL = detail::nodal(u, e, mesh.n_cells), uR = detail::nodal(u, e + 1, mesh.n_cells);
    const Scalar jump = detail::nodal(v, e + 1, mesh.n_cells) - detail::nodal(v, e, mesh.n_cells);
    if (e > 0)
    {
      N(e - 1) += jump * (Scalar(2) * uL + uR) / Scalar(6);
    }
    if (e + 1 < mesh.n_cells)
    {
      N(e) += jump * (uL + Scalar(2) * uR) / Scalar(6);
    }
  }
  return N;
}

// Convection vector N_j(u) = b(u, u, psi_j).
template <typename Scalar>
Vector<Scalar> convection_vector(const Vector<Scalar> &u, const Mesh1D &mesh)
{
  return trilinear_vector<Scalar>(u, u, mesh);
}

// Convection vector for each column of U.
template <typename Scalar>
Matrix<Scalar> convection_vectors(const Matrix<Scalar> &U, const Mesh1D &mesh)
{
  Matrix<Scalar> N(U.rows(), U.cols());
  for (Index c = 0; c < U.cols(); ++c)
  {
    N.col(c) = convection_vector<Scalar>(U.col(c), mesh);
  }
  return N;
}

// Jacobian dN/du of convection_vector.
template <typename Scalar>
Tridiagonal<Scalar> convection_jacobian(const Vector<Scalar> &u, const Mesh1D &mesh)
{
  detail::check_size(u, mesh.n_dof, "convection_jacobian");
  const Index n = mesh.n_dof;
  Tridiagonal<Scalar> J{Vector<Scalar>::Zero(n - 1), Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n - 1)};
  for (Index e = 0; e < mesh.n_cells; ++e)
  {
    const Scalar uL = detail::nodal(u, e, mesh.n_cells), uR = detail::nodal(u, e + 1, mesh.n_cells);
    const bool left_interior = e > 0;
    const bool right_interior = e + 1 < mesh.n_cells;
    const Index iL = e - 1, iR = e;
    if (left_interior)
    {
      J.diag(iL) += (uR - Scalar(4) * uL) / Scalar(6);
      if (right_interior)
      {
        J.upper(iL) += (uL + Scalar(2) * uR) / Scalar(6);
      }
    }
    if (right_interior)
    {
      J.diag(iR) += (Scalar(4) * uR - uL) / Scalar(6);
      if (left_interior)
      {
        J.lower(iL) += -(Scalar(2) * uL + uR) / Scalar(6);
      }
    }
  }
  return J;
}

}  // namespace ddvms::fe1d

#endif  // DDVMS_FE1D_HPP
