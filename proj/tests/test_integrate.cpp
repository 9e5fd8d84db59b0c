// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace ddvms;

namespace
{

rom::RomOperators<double> two_mode_system()
{
  rom::RomOperators<double> ops;
  ops.A = (MatrixXd(2, 2) << -1.0, 0.5, -0.5, -2.0).finished();
  ops.B.slices = {(MatrixXd(2, 2) << 0.1, -0.3, 0.2, 0.0).finished(),
                  (MatrixXd(2, 2) << 0.0, 0.4, -0.1, 0.2).finished()};
  return ops;
}

VectorXd rhs(const rom::RomOperators<double> &ops, const MatrixXd &L, const VectorXd &a)
{
  return L * a + ops.B.apply(a);
}

VectorXd rk4(const rom::RomOperators<double> &ops, const MatrixXd &L, VectorXd a, double T, Index steps)
{
  const double h = T / static_cast<double>(steps);
  for (Index n = 0; n < steps; ++n)
  {
    const VectorXd k1 = rhs(ops, L, a);
    const VectorXd k2 = rhs(ops, L, a + 0.5 * h * k1);
    const VectorXd k3 = rhs(ops, L, a + 0.5 * h * k2);
    const VectorXd k4 = rhs(ops, L, a + h * k3);
    a += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return a;
}

double observed_order(integrate::Scheme scheme, const MatrixXd *closure)
{
  const auto ops = two_mode_system();
  const MatrixXd L = closure ? MatrixXd(ops.A + *closure) : ops.A;
  const VectorXd a0 = (VectorXd(2) << 1.0, 0.5).finished();
  const double T = 1.0;
  const VectorXd ref = rk4(ops, L, a0, T, 20000);
  std::vector<double> errs, dts;
  for (const Index steps : {50, 100, 200, 400})
  {
    integrate::IntegratorConfig cfg;
    cfg.scheme = scheme;
    cfg.dt = T / static_cast<double>(steps);
    const MatrixXd traj = integrate::run_rom<double>(a0, ops, closure, cfg, steps);
    errs.push_back((traj.col(steps) - ref).norm());
    dts.push_back(cfg.dt);
  }
  return std::log(errs[2] / errs[3]) / std::log(dts[2] / dts[3]);
}

}  // namespace

TEST(Integrate, BackwardEulerIsFirstOrder)
{
  EXPECT_NEAR(observed_order(integrate::Scheme::backward_euler, nullptr), 1.0, 0.1);
}

TEST(Integrate, LinearizedBdf2IsSecondOrder)
{
  EXPECT_NEAR(observed_order(integrate::Scheme::bdf2_linearized, nullptr), 2.0, 0.1);
}

TEST(Integrate, ClosureEntersAsLinearTerm)
{
  const MatrixXd closure = (MatrixXd(2, 2) << -0.5, 0.2, -0.2, -0.1).finished();
  EXPECT_NEAR(observed_order(integrate::Scheme::backward_euler, &closure), 1.0, 0.1);
  EXPECT_NEAR(observed_order(integrate::Scheme::bdf2_linearized, &closure), 2.0, 0.1);

  auto ops = two_mode_system();
  integrate::IntegratorConfig cfg;
  cfg.dt = 0.01;
  const VectorXd a0 = (VectorXd(2) << 1.0, 0.5).finished();
  const MatrixXd with = integrate::run_rom<double>(a0, ops, &closure, cfg, 10);
  ops.A += closure;
  const MatrixXd merged = integrate::run_rom<double>(a0, ops, nullptr, cfg, 10);
  EXPECT_LT((with - merged).norm(), 1e-13);
}

TEST(Integrate, BackwardEulerSolvesItsResidual)
{
  const auto ops = two_mode_system();
  integrate::IntegratorConfig cfg;
  cfg.dt = 0.05;
  const VectorXd a0 = (VectorXd(2) << 1.0, -2.0).finished();
  const VectorXd a1 = integrate::step_grom_be<double>(a0, ops, nullptr, cfg);
  const VectorXd R = (a1 - a0) / cfg.dt - ops.A * a1 - ops.B.apply(a1);
  EXPECT_LT(R.norm(), 1e-11);
}

TEST(Integrate, ForcingIsApplied)
{
  rom::RomOperators<double> ops;
  ops.A = MatrixXd::Zero(1, 1);
  ops.B = rom::ConvectionTensor<double>::zero(1);
  ops.forcing = MatrixXd::Constant(1, 11, 2.0);
  integrate::IntegratorConfig cfg;
  cfg.dt = 0.1;
  const MatrixXd traj = integrate::run_rom<double>(VectorXd::Zero(1), ops, nullptr, cfg, 10);
  EXPECT_NEAR(traj(0, 10), 2.0, 1e-12);
}

TEST(Integrate, BlowUpIsDetected)
{
  rom::RomOperators<double> ops;
  ops.A = MatrixXd::Identity(1, 1) * 5.0;
  ops.B = rom::ConvectionTensor<double>::zero(1);
  integrate::IntegratorConfig cfg;
  cfg.dt = 0.1;
  cfg.blowup_norm = 100.0;
  cfg.scheme = integrate::Scheme::bdf2_linearized;
  EXPECT_THROW(integrate::run_rom<double>(VectorXd::Ones(1), ops, nullptr, cfg, 100), BlowUp);
}

TEST(Integrate, ShapeChecks)
{
  const auto ops = two_mode_system();
  integrate::IntegratorConfig cfg;
  const MatrixXd bad = MatrixXd::Zero(3, 3);
  EXPECT_THROW(integrate::run_rom<double>(VectorXd::Ones(3), ops, nullptr, cfg, 2), DimensionError);
  EXPECT_THROW(integrate::run_rom<double>(VectorXd::Ones(2), ops, &bad, cfg, 2), DimensionError);
  cfg.dt = 0.0;
  EXPECT_THROW(integrate::run_rom<double>(VectorXd::Ones(2), ops, nullptr, cfg, 2), ConfigError);
}
