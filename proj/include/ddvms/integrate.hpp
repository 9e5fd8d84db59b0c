// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_INTEGRATE_HPP
#define DDVMS_INTEGRATE_HPP

#include <cmath>

#include "ddvms/rom_core.hpp"

//
// Time stepping for  da/dt = b + (A + A_tilde) a + a^T B a.  G-ROM is the same system with
// A_tilde = 0.
//
namespace ddvms::integrate
{

enum class Scheme
{
  backward_euler,
  bdf2_linearized,
};

struct IntegratorConfig
{
  Scheme scheme = Scheme::backward_euler;
  double dt = 5e-4;
  double newton_tol = 1e-12;
  int newton_max_iter = 50;
  double blowup_norm = 1e8;

  void validate() const
  {
    if (!(dt > 0.0))
    {
      throw ConfigError("IntegratorConfig: dt must be > 0");
    }
  }
};

namespace detail
{
template <typename Scalar>
Matrix<Scalar> linear_operator(const rom::RomOperators<Scalar> &ops, const Matrix<Scalar> *closure)
{
  if (closure == nullptr)
  {
    return ops.A;
  }
  if (closure->rows() != ops.dim() || closure->cols() != ops.dim())
  {
    throw DimensionError("integrate: closure matrix shape does not match ROM dimension");
  }
  return ops.A + *closure;
}

template <typename Scalar>
void check_state(const Vector<Scalar> &a, Index dim, const char *who)
{
  if (a.size() != dim)
  {
    throw DimensionError(std::string(who) + ": state size " + std::to_string(a.size()) + " != ROM dimension " +
                         std::to_string(dim));
  }
}
}  // namespace detail

//
// Backward Euler: solves (a - a_prev)/dt = b^n + L a + a^T B a by Newton. Convergence is
// declared when ||R|| <= newton_tol (1 + ||a_prev|| / dt), i.e. relative to the size of the
// time-difference term.
//
template <typename Scalar>
Vector<Scalar> step_grom_be(const Vector<Scalar> &a_prev, const rom::RomOperators<Scalar> &ops,
                            const Matrix<Scalar> *closure, const IntegratorConfig &cfg, Index n = 1)
{
  detail::check_state(a_prev, ops.dim(), "step_grom_be");
  const Index r = ops.dim();
  const Matrix<Scalar> L = detail::linear_operator(ops, closure);
  const Vector<Scalar> b = ops.forcing_at(n);
  const Scalar inv_dt = Scalar(1) / Scalar(cfg.dt);
  const Scalar tol = Scalar(cfg.newton_tol) * (Scalar(1) + a_prev.norm() * inv_dt);

  auto residual = [&](const Vector<Scalar> &a) -> Vector<Scalar> {
    return (a - a_prev) * inv_dt - b - L * a - ops.B.apply(a);
  };

  Vector<Scalar> a = a_prev;
  Vector<Scalar> R = residual(a);
  for (int it = 0; it < cfg.newton_max_iter; ++it)
  {
    if (!R.allFinite())
    {
      throw BlowUp("step_grom_be: non-finite residual", n);
    }
    if (R.norm() <= tol)
    {
      return a;
    }
    const Matrix<Scalar> J = inv_dt * Matrix<Scalar>::Identity(r, r) - L - ops.B.jacobian(a);
    Eigen::FullPivLU<Matrix<Scalar>> lu(J);
    if (!lu.isInvertible())
    {
      throw SingularSystem("step_grom_be: singular Newton Jacobian");
    }
    a += lu.solve(-R);
    R = residual(a);
  }
  if (R.allFinite() && R.norm() <= tol)
  {
    return a;
  }
  throw NonConvergence("step_grom_be Newton", cfg.newton_max_iter, static_cast<double>(R.norm()));
}

//
// Linearly implicit BDF2: (3a - 4a_prev + a_prev2)/(2dt) = b^n + L a + ext^T B a with the
// extrapolant ext = 2 a_prev - a_prev2 in the convecting slot. One linear solve per step.
//
template <typename Scalar>
Vector<Scalar> step_bdf2_linearized(const Vector<Scalar> &a_prev, const Vector<Scalar> &a_prev2,
                                    const rom::RomOperators<Scalar> &ops, const Matrix<Scalar> *closure,
                                    const IntegratorConfig &cfg, Index n = 2)
{
  detail::check_state(a_prev, ops.dim(), "step_bdf2_linearized");
  detail::check_state(a_prev2, ops.dim(), "step_bdf2_linearized");
  const Index r = ops.dim();
  const Scalar inv_2dt = Scalar(1) / (Scalar(2) * Scalar(cfg.dt));
  const Vector<Scalar> ext = Scalar(2) * a_prev - a_prev2;
  const Matrix<Scalar> lhs = Scalar(3) * inv_2dt * Matrix<Scalar>::Identity(r, r) -
                             detail::linear_operator(ops, closure) - ops.B.convect(ext);
  const Vector<Scalar> rhs = ops.forcing_at(n) + (Scalar(4) * a_prev - a_prev2) * inv_2dt;
  Eigen::FullPivLU<Matrix<Scalar>> lu(lhs);
  if (!lu.isInvertible())
  {
    throw SingularSystem("step_bdf2_linearized: singular system");
  }
  return lu.solve(rhs);
}

// Returns the r x (n_steps + 1) coefficient trajectory starting from a0. BDF2 takes its first
// step with backward Euler.
template <typename Scalar>
Matrix<Scalar> run_rom(const Vector<Scalar> &a0, const rom::RomOperators<Scalar> &ops, const Matrix<Scalar> *closure,
                       const IntegratorConfig &cfg, Index n_steps)
{
  cfg.validate();
  detail::check_state(a0, ops.dim(), "run_rom");
  Matrix<Scalar> traj(ops.dim(), n_steps + 1);
  traj.col(0) = a0;
  for (Index n = 1; n <= n_steps; ++n)
  {
    Vector<Scalar> next;
    try
    {
      if (cfg.scheme == Scheme::bdf2_linearized && n >= 2)
      {
        next = step_bdf2_linearized<Scalar>(traj.col(n - 1), traj.col(n - 2), ops, closure, cfg, n);
      }
      else
      {
        next = step_grom_be<Scalar>(traj.col(n - 1), ops, closure, cfg, n);
      }
    }
    catch (const BlowUp &)
    {
      throw;
    }
    catch (const NumericalError &e)
    {
      throw StepFailure(e.what(), n);
    }
    if (!next.allFinite() || static_cast<double>(next.norm()) > cfg.blowup_norm)
    {
      throw BlowUp("run_rom: state left the finite range", n);
    }
    traj.col(n) = next;
  }
  return traj;
}

}  // namespace ddvms::integrate

#endif  // DDVMS_INTEGRATE_HPP
