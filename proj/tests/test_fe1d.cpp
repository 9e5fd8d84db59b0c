// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ddvms/fe1d.hpp"
#include "test_util.hpp"

using namespace ddvms;
using fe1d::Mesh1D;

namespace
{

constexpr double pi = std::numbers::pi;

VectorXd interpolate(const Mesh1D &mesh, double (*f)(double))
{
  VectorXd u(mesh.n_dof);
  for (Index i = 0; i < mesh.n_dof; ++i)
  {
    u(i) = f(mesh.node(i));
  }
  return u;
}

double nodal(const VectorXd &u, Index node, Index n_cells)
{
  return (node == 0 || node == n_cells) ? 0.0 : u(node - 1);
}

// Three-point Gauss-Legendre evaluation of \int u v_x w over every cell.
double gauss_trilinear(const VectorXd &u, const VectorXd &v, const VectorXd &w, const Mesh1D &mesh)
{
  const double xg[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double wg[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double total = 0.0;
  for (Index e = 0; e < mesh.n_cells; ++e)
  {
    const double uL = nodal(u, e, mesh.n_cells), uR = nodal(u, e + 1, mesh.n_cells);
    const double vL = nodal(v, e, mesh.n_cells), vR = nodal(v, e + 1, mesh.n_cells);
    const double wL = nodal(w, e, mesh.n_cells), wR = nodal(w, e + 1, mesh.n_cells);
    const double vx = (vR - vL) / mesh.h;
    for (int q = 0; q < 3; ++q)
    {
      const double s = 0.5 * (xg[q] + 1.0);
      const double uq = (1 - s) * uL + s * uR;
      const double wq = (1 - s) * wL + s * wR;
      total += 0.5 * mesh.h * wg[q] * uq * vx * wq;
    }
  }
  return total;
}

}  // namespace

TEST(Fe1d, MassAndStiffnessClosedForms)
{
  for (const Index n : {2, 7, 64})
  {
    const auto mesh = Mesh1D::uniform(n);
    const auto ops = fe1d::assemble_fe_operators<double>(mesh);
    const double h = 1.0 / static_cast<double>(n);
    ASSERT_EQ(ops.n_dof(), n - 1);
    for (Index i = 0; i < ops.n_dof(); ++i)
    {
      EXPECT_EQ(ops.mass.diag(i), 2.0 * h / 3.0);
      EXPECT_EQ(ops.stiffness.diag(i), 2.0 / h);
    }
    for (Index i = 0; i + 1 < ops.n_dof(); ++i)
    {
      EXPECT_EQ(ops.mass.off(i), h / 6.0);
      EXPECT_EQ(ops.stiffness.off(i), -1.0 / h);
    }
  }
}

TEST(Fe1d, TridiagonalProductsMatchDense)
{
  std::mt19937_64 rng(7);
  const auto ops = fe1d::assemble_fe_operators<double>(Mesh1D::uniform(9));
  const VectorXd x = test::random_vector(rng, 8);
  const MatrixXd X = test::random_matrix(rng, 8, 3);
  EXPECT_LT((ops.mass * x - ops.mass.dense() * x).norm(), 1e-14);
  EXPECT_LT((ops.stiffness.apply(X) - ops.stiffness.dense() * X).norm(), 1e-12);
}

TEST(Fe1d, ThomasSolveMatchesDense)
{
  std::mt19937_64 rng(11);
  const Index n = 12;
  fe1d::Tridiagonal<double> T{test::random_vector(rng, n - 1), VectorXd::Constant(n, 5.0) + test::random_vector(rng, n),
                              test::random_vector(rng, n - 1)};
  const VectorXd b = test::random_vector(rng, n);
  const VectorXd x = fe1d::solve(T, b);
  const VectorXd ref = T.dense().fullPivLu().solve(b);
  EXPECT_LT((x - ref).norm(), 1e-12);
}

TEST(Fe1d, ThomasSolveRejectsSingular)
{
  fe1d::Tridiagonal<double> T{VectorXd::Zero(2), VectorXd::Zero(3), VectorXd::Zero(2)};
  EXPECT_THROW(fe1d::solve(T, VectorXd(VectorXd::Ones(3))), SingularSystem);
}

TEST(Fe1d, InnerProductsConvergeQuadratically)
{
  // \int sin(pi x) x (1 - x) = 4 / pi^3, \int (pi cos pi x)^2 = pi^2 / 2.
  std::vector<double> hs, e_l2, e_h1;
  for (const Index n : {64, 128, 256})
  {
    const auto mesh = Mesh1D::uniform(n);
    const auto ops = fe1d::assemble_fe_operators<double>(mesh);
    const VectorXd u = interpolate(mesh, [](double x) { return std::sin(pi * x); });
    const VectorXd v = interpolate(mesh, [](double x) { return x * (1.0 - x); });
    hs.push_back(mesh.h);
    e_l2.push_back(std::abs(fe1d::l2_inner(u, v, ops) - 4.0 / (pi * pi * pi)));
    e_h1.push_back(std::abs(fe1d::h1_seminorm_sq(u, ops) - pi * pi / 2.0));
  }
  for (std::size_t i = 0; i + 1 < hs.size(); ++i)
  {
    const double s_l2 = std::log(e_l2[i] / e_l2[i + 1]) / std::log(hs[i] / hs[i + 1]);
    const double s_h1 = std::log(e_h1[i] / e_h1[i + 1]) / std::log(hs[i] / hs[i + 1]);
    EXPECT_NEAR(s_l2, 2.0, 0.1);
    EXPECT_NEAR(s_h1, 2.0, 0.1);
  }
}

TEST(Fe1d, NonlinearFormMatchesGaussQuadrature)
{
  std::mt19937_64 rng(3);
  for (const Index n : {2, 5, 33})
  {
    const auto mesh = Mesh1D::uniform(n);
    for (int trial = 0; trial < 20; ++trial)
    {
      const VectorXd u = test::random_vector(rng, mesh.n_dof), v = test::random_vector(rng, mesh.n_dof),
                     w = test::random_vector(rng, mesh.n_dof);
      const double ref = gauss_trilinear(u, v, w, mesh);
      EXPECT_NEAR(fe1d::nonlinear_form(u, v, w, mesh), ref, 1e-12 * (1.0 + std::abs(ref)));
      EXPECT_NEAR(fe1d::trilinear_vector(u, v, mesh).dot(w), ref, 1e-12 * (1.0 + std::abs(ref)));
    }
  }
}

TEST(Fe1d, NonlinearFormIsTrilinearAndSelfConvectionVanishes)
{
  std::mt19937_64 rng(5);
  const auto mesh = Mesh1D::uniform(17);
  const Index n = mesh.n_dof;
  const VectorXd u = test::random_vector(rng, n), u2 = test::random_vector(rng, n), v = test::random_vector(rng, n),
                 w = test::random_vector(rng, n);
  const double a = 1.7, b = -0.3;
  const VectorXd uu = a * u + b * u2;
  EXPECT_NEAR(fe1d::nonlinear_form<double>(uu, v, w, mesh),
              a * fe1d::nonlinear_form(u, v, w, mesh) + b * fe1d::nonlinear_form(u2, v, w, mesh), 1e-12);
  EXPECT_NEAR(fe1d::nonlinear_form<double>(v, uu, w, mesh),
              a * fe1d::nonlinear_form(v, u, w, mesh) + b * fe1d::nonlinear_form(v, u2, w, mesh), 1e-12);
  EXPECT_NEAR(fe1d::nonlinear_form<double>(v, w, uu, mesh),
              a * fe1d::nonlinear_form(v, w, u, mesh) + b * fe1d::nonlinear_form(v, w, u2, mesh), 1e-12);
  // b(u, u, u) = \int u^2 u_x = [u^3 / 3] = 0 with homogeneous boundary values.
  EXPECT_NEAR(fe1d::nonlinear_form(u, u, u, mesh), 0.0, 1e-13);
  EXPECT_NEAR(fe1d::convection_vector(u, mesh).dot(u), 0.0, 1e-13);
}

TEST(Fe1d, ConvectionJacobianMatchesFiniteDifferences)
{
  std::mt19937_64 rng(9);
  const auto mesh = Mesh1D::uniform(12);
  const VectorXd u = test::random_vector(rng, mesh.n_dof);
  const MatrixXd J = fe1d::convection_jacobian(u, mesh).dense();
  const double eps = 1e-6;
  for (Index j = 0; j < mesh.n_dof; ++j)
  {
    VectorXd up = u, um = u;
    up(j) += eps;
    um(j) -= eps;
    const VectorXd col = (fe1d::convection_vector<double>(up, mesh) - fe1d::convection_vector<double>(um, mesh)) /
                         (2 * eps);
    EXPECT_LT((J.col(j) - col).norm(), 1e-8);
  }
}

TEST(Fe1d, DimensionChecks)
{
  const auto mesh = Mesh1D::uniform(4);
  const auto ops = fe1d::assemble_fe_operators<double>(mesh);
  EXPECT_THROW(fe1d::l2_inner<double>(VectorXd::Ones(2), VectorXd::Ones(3), ops), DimensionError);
  EXPECT_THROW(fe1d::convection_vector<double>(VectorXd::Ones(5), mesh), DimensionError);
}
