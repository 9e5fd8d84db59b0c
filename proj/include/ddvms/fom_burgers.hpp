// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_FOM_BURGERS_HPP
#define DDVMS_FOM_BURGERS_HPP

#include <cmath>
#include <vector>

#include "ddvms/fe1d.hpp"

//
// Full-order model: u_t - nu u_xx + u u_x = 0 on (0,1), u(0) = u(1) = 0, discretized with
// linear finite elements and backward Euler. Each step solves
//
//   M (u - u_prev) / dt + nu K u + N(u) = 0
//
// by Newton's method with the analytic tridiagonal Jacobian.
//
namespace ddvms::fom
{

struct BurgersConfig
{
  double nu = 1e-2;
  fe1d::Mesh1D mesh = fe1d::Mesh1D::uniform(2048);
  double dt = 5e-4;
  double t_start = 0.0;
  double t_end = 1.0;
  double newton_tol = 1e-10;
  int newton_max_iter = 25;

  void validate() const
  {
    if (!(nu > 0.0))
    {
      throw ConfigError("BurgersConfig: nu must be > 0");
    }
    if (!(dt > 0.0))
    {
      throw ConfigError("BurgersConfig: dt must be > 0");
    }
    if (!(t_end > t_start))
    {
      throw ConfigError("BurgersConfig: t_end must exceed t_start");
    }
    if (!(newton_tol > 0.0) || newton_max_iter < 1)
    {
      throw ConfigError("BurgersConfig: invalid Newton settings");
    }
    const double steps = (t_end - t_start) / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
    {
      throw ConfigError("BurgersConfig: (t_end - t_start) / dt is not an integer");
    }
  }

  Index n_steps() const { return static_cast<Index>(std::llround((t_end - t_start) / dt)); }
};

template <typename Scalar>
struct Trajectory
{
  Vector<double> times;
  Matrix<Scalar> states;  // n_dof x n_times

  Index size() const { return states.cols(); }
};

// Nodal interpolant of u0 = 1 on (0, 1/2], 0 on (1/2, 1].
template <typename Scalar = double>
Vector<Scalar> initial_condition(const fe1d::Mesh1D &mesh)
{
  Vector<Scalar> u(mesh.n_dof);
  for (Index i = 0; i < mesh.n_dof; ++i)
  {
    // Integer comparison keeps the node x = 1/2 exact: 2 (i + 1) <= n_cells.
    u(i) = 2 * (i + 1) <= mesh.n_cells ? Scalar(1) : Scalar(0);
  }
  return u;
}

template <typename Scalar>
Vector<Scalar> residual(const Vector<Scalar> &u, const Vector<Scalar> &u_prev, const BurgersConfig &cfg,
                        const fe1d::FeOperators<Scalar> &ops)
{
  const Scalar inv_dt = Scalar(1) / Scalar(cfg.dt);
  return ops.mass * ((u - u_prev) * inv_dt) + Scalar(cfg.nu) * (ops.stiffness * u) +
         fe1d::convection_vector<Scalar>(u, ops.mesh);
}

template <typename Scalar>
Vector<Scalar> step_backward_euler(const Vector<Scalar> &u_prev, const BurgersConfig &cfg,
                                   const fe1d::FeOperators<Scalar> &ops)
{
  if (u_prev.size() != ops.n_dof())
  {
    throw DimensionError("step_backward_euler: state size mismatch");
  }
  const Scalar inv_dt = Scalar(1) / Scalar(cfg.dt);
  const Scalar nu(cfg.nu);

  // Linear part of the Jacobian: M / dt + nu K.
  fe1d::Tridiagonal<Scalar> linear{ops.mass.off * inv_dt + nu * ops.stiffness.off,
                                   ops.mass.diag * inv_dt + nu * ops.stiffness.diag,
                                   ops.mass.off * inv_dt + nu * ops.stiffness.off};

  Vector<Scalar> u = u_prev;
  Vector<Scalar> R = residual(u, u_prev, cfg, ops);
  Scalar rnorm = R.norm();
  for (int it = 0; it < cfg.newton_max_iter; ++it)
  {
    if (rnorm <= Scalar(cfg.newton_tol))
    {
      return u;
    }
    fe1d::Tridiagonal<Scalar> J = fe1d::convection_jacobian<Scalar>(u, ops.mesh);
    J.lower += linear.lower;
    J.diag += linear.diag;
    J.upper += linear.upper;
    const Vector<Scalar> delta = fe1d::solve<Scalar>(J, -R);

    Scalar factor(1);
    Vector<Scalar> trial = u + delta;
    Vector<Scalar> Rtrial = residual(trial, u_prev, cfg, ops);
    for (int halving = 0; halving < 4 && Rtrial.norm() > rnorm; ++halving)
    {
      factor /= Scalar(2);
      trial = u + factor * delta;
      Rtrial = residual(trial, u_prev, cfg, ops);
    }
    u = std::move(trial);
    R = std::move(Rtrial);
    rnorm = R.norm();
  }
  if (rnorm <= Scalar(cfg.newton_tol))
  {
    return u;
  }
  throw NonConvergence("Burgers Newton solve", cfg.newton_max_iter, static_cast<double>(rnorm));
}

template <typename Scalar = double>
Trajectory<Scalar> run(const BurgersConfig &cfg)
{
  cfg.validate();
  const auto ops = fe1d::assemble_fe_operators<Scalar>(cfg.mesh);
  const Index steps = cfg.n_steps();
  Trajectory<Scalar> traj;
  traj.times.resize(steps + 1);
  traj.states.resize(cfg.mesh.n_dof, steps + 1);
  traj.states.col(0) = initial_condition<Scalar>(cfg.mesh);
  traj.times(0) = cfg.t_start;
  for (Index n = 1; n <= steps; ++n)
  {
    traj.times(n) = cfg.t_start + static_cast<double>(n) * cfg.dt;
    try
    {
      traj.states.col(n) = step_backward_euler<Scalar>(traj.states.col(n - 1), cfg, ops);
    }
    catch (const NumericalError &e)
    {
      throw StepFailure(e.what(), n);
    }
  }
  return traj;
}

}  // namespace ddvms::fom

#endif  // DDVMS_FOM_BURGERS_HPP
