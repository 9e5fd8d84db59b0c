// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "ddvms/fom_burgers.hpp"
#include "test_util.hpp"

using namespace ddvms;

namespace
{

// Backward Euler step by Picard iteration on dense matrices: the convecting field is frozen
// at the previous iterate and the resulting linear system is solved with LU.
VectorXd picard_step(const VectorXd &u_prev, const fom::BurgersConfig &cfg)
{
  const auto ops = fe1d::assemble_fe_operators<double>(cfg.mesh);
  const Index n = ops.n_dof();
  const MatrixXd M = ops.mass.dense(), K = ops.stiffness.dense();
  VectorXd u = u_prev;
  for (int it = 0; it < 200; ++it)
  {
    MatrixXd C(n, n);
    for (Index j = 0; j < n; ++j)
    {
      C.col(j) = fe1d::trilinear_vector<double>(u, VectorXd::Unit(n, j), cfg.mesh);
    }
    const MatrixXd lhs = M / cfg.dt + cfg.nu * K + C;
    const VectorXd next = lhs.partialPivLu().solve(M * u_prev / cfg.dt);
    const double change = (next - u).norm();
    u = next;
    if (change < 1e-15)
    {
      break;
    }
  }
  return u;
}

}  // namespace

TEST(Fom, InitialConditionIsUnitStep)
{
  const auto mesh = fe1d::Mesh1D::uniform(8);
  const VectorXd u0 = fom::initial_condition(mesh);
  // Nodes x = 1/8 .. 7/8; 1 on (0, 1/2], 0 beyond.
  const VectorXd expected = (VectorXd(7) << 1, 1, 1, 1, 0, 0, 0).finished();
  EXPECT_EQ(u0, expected);
}

TEST(Fom, NewtonStepMatchesPicardOracle)
{
  fom::BurgersConfig cfg;
  cfg.mesh = fe1d::Mesh1D::uniform(32);
  cfg.dt = 1e-3;
  cfg.newton_tol = 1e-13;
  const auto ops = fe1d::assemble_fe_operators<double>(cfg.mesh);
  VectorXd u = fom::initial_condition(cfg.mesh);
  for (int step = 0; step < 3; ++step)
  {
    const VectorXd newton = fom::step_backward_euler(u, cfg, ops);
    const VectorXd picard = picard_step(u, cfg);
    EXPECT_LT((newton - picard).lpNorm<Eigen::Infinity>(), 1e-10);
    u = newton;
  }
}

TEST(Fom, StepResidualIsSmall)
{
  fom::BurgersConfig cfg;
  cfg.mesh = fe1d::Mesh1D::uniform(128);
  const auto ops = fe1d::assemble_fe_operators<double>(cfg.mesh);
  const VectorXd u0 = fom::initial_condition(cfg.mesh);
  const VectorXd u1 = fom::step_backward_euler(u0, cfg, ops);
  EXPECT_LE(fom::residual(u1, u0, cfg, ops).norm(), cfg.newton_tol);
}

TEST(Fom, SnapshotCountAndEnergyDecay)
{
  fom::BurgersConfig cfg;
  cfg.mesh = fe1d::Mesh1D::uniform(64);
  cfg.dt = 2e-3;
  cfg.t_end = 0.5;
  const auto traj = fom::run(cfg);
  ASSERT_EQ(traj.size(), 251);
  EXPECT_DOUBLE_EQ(traj.times(250), 0.5);
  const auto ops = fe1d::assemble_fe_operators<double>(cfg.mesh);
  double prev = fe1d::l2_inner<double>(traj.states.col(0), traj.states.col(0), ops);
  for (Index n = 1; n < traj.size(); ++n)
  {
    const double e = fe1d::l2_inner<double>(traj.states.col(n), traj.states.col(n), ops);
    EXPECT_LE(e, prev * (1.0 + 1e-14)) << "step " << n;
    prev = e;
  }
}

TEST(Fom, ReferenceConfigurationStepCount)
{
  const fom::BurgersConfig cfg;
  EXPECT_EQ(cfg.n_steps() + 1, 2001);
  EXPECT_EQ(cfg.mesh.n_dof, 2047);
}

TEST(Fom, InvalidConfigurationsThrow)
{
  fom::BurgersConfig cfg;
  cfg.nu = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.dt = 3e-4;  // 1 / 3e-4 is not an integer
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.t_end = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Fom, NewtonFailureIsReportedWithStep)
{
  fom::BurgersConfig cfg;
  cfg.mesh = fe1d::Mesh1D::uniform(16);
  cfg.dt = 1e-2;
  cfg.t_end = 0.1;
  cfg.newton_max_iter = 1;
  cfg.newton_tol = 1e-300;
  try
  {
    fom::run(cfg);
    FAIL() << "expected StepFailure";
  }
  catch (const StepFailure &e)
  {
    EXPECT_EQ(e.step, 1);
  }
}
