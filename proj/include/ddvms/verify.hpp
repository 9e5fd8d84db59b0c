// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_VERIFY_HPP
#define DDVMS_VERIFY_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ddvms/closure.hpp"
#include "ddvms/integrate.hpp"
#include "ddvms/rom_core.hpp"

namespace ddvms::verify
{

// Everything a verifiability sweep needs, independent of where the data came from.
template <typename Scalar>
struct RomProblem
{
  std::string label;
  Matrix<Scalar> truth;                               // a_d^n, at least max(r) rows, M columns
  rom::RomOperators<Scalar> operators;                // leading block covers every swept r
  std::map<Index, rom::ClosureTargets<Scalar>> targets;
  Vector<double> times;
  double dt = 0.0;
  integrate::IntegratorConfig integrator;
  std::optional<Matrix<Scalar>> stiffness_gram;      // (grad phi_m, grad phi_i)
  std::optional<double> reynolds;

  Index snapshots() const { return truth.cols(); }

  Index max_rank() const
  {
    Index r = std::min<Index>(truth.rows(), operators.dim());
    return r;
  }

  Matrix<Scalar> truth_rows(Index r) const { return truth.topRows(r); }

  const rom::ClosureTargets<Scalar> &targets_for(Index r) const
  {
    const auto it = targets.find(r);
    if (it == targets.end())
    {
      throw ConfigError("RomProblem '" + label + "': no closure targets for r = " + std::to_string(r));
    }
    return it->second;
  }

  void check_rank(Index r) const
  {
    if (r < 1 || r > max_rank())
    {
      throw ConfigError("RomProblem '" + label + "': r = " + std::to_string(r) + " outside [1, " +
                        std::to_string(max_rank()) + "]");
    }
  }
};

enum class TrialStatus
{
  ok,
  solver_failed,
  blow_up,
};

inline const char *to_string(TrialStatus s)
{
  switch (s)
  {
  case TrialStatus::ok:
    return "ok";
  case TrialStatus::solver_failed:
    return "solver_failed";
  case TrialStatus::blow_up:
    return "blow_up";
  }
  return "unknown";
}

struct TrialRecord
{
  Index r = 0;
  Index k = 0;
  double E_L2 = 0.0;
  double eta_L2 = 0.0;
  double cond_EtE = 0.0;
  TrialStatus status = TrialStatus::ok;
  double dissipativity_min = 0.0;
  double kkt_residual = 0.0;
  std::string note;

  bool ok() const { return status == TrialStatus::ok; }
};

struct RegressionResult
{
  double alpha = 0.0;
  double beta = 0.0;
  Index n_points = 0;
  double threshold = 0.0;
};

// (1/M) sum_n ||b^n - a^n||^2
template <typename Scalar>
Scalar rom_error_E(const Matrix<Scalar> &truth, const Matrix<Scalar> &rom)
{
  if (truth.rows() != rom.rows() || truth.cols() != rom.cols() || truth.cols() == 0)
  {
    throw DimensionError("rom_error_E: shape mismatch");
  }
  return (truth - rom).squaredNorm() / Scalar(truth.cols());
}

// (1/M) sum_n ||tau^n + A_tilde b^n||^2, i.e. the mean squared mismatch between the exact
// closure and the modeled closure evaluated on the truth.
template <typename Scalar>
Scalar closure_error_eta(const rom::ClosureTargets<Scalar> &targets, const Matrix<Scalar> &A_tilde,
                         const Matrix<Scalar> &truth)
{
  if (targets.tau.rows() != truth.rows() || targets.tau.cols() != truth.cols() || A_tilde.rows() != truth.rows() ||
      A_tilde.cols() != truth.rows() || truth.cols() == 0)
  {
    throw DimensionError("closure_error_eta: shape mismatch");
  }
  return (targets.tau + A_tilde * truth).squaredNorm() / Scalar(truth.cols());
}

// One (r, k) trial against a prebuilt least-squares system for rank r.
template <typename Scalar>
TrialRecord run_trial(const RomProblem<Scalar> &problem, const closure::LeastSquaresSystem<Scalar> &sys,
                      const rom::RomOperators<Scalar> &ops_r, Index k, const closure::SolverSettings &settings = {})
{
  const Index r = sys.r;
  TrialRecord rec;
  rec.r = r;
  rec.k = k;
  rec.cond_EtE = sys.cond_EtE;

  const auto fit = closure::solve_constrained(closure::truncated_svd(sys, k), settings);
  rec.kkt_residual = fit.kkt_residual;
  if (!fit.ok())
  {
    rec.status = TrialStatus::solver_failed;
    rec.note = fit.failure_reason;
    return rec;
  }
  const Matrix<Scalar> &b_r = sys.truth;
  Matrix<Scalar> a_r;
  try
  {
    a_r = integrate::run_rom<Scalar>(b_r.col(0), ops_r, &fit.A_tilde, problem.integrator, b_r.cols() - 1);
  }
  catch (const NumericalError &e)
  {
    rec.status = TrialStatus::blow_up;
    rec.note = e.what();
    return rec;
  }
  rec.E_L2 = static_cast<double>(rom_error_E(b_r, a_r));
  rec.eta_L2 = static_cast<double>(closure_error_eta(problem.targets_for(r), fit.A_tilde, b_r));
  const Vector<Scalar> audit = rom::mean_dissipativity_audit<Scalar>(fit.A_tilde, b_r, a_r);
  rec.dissipativity_min = static_cast<double>(audit.minCoeff());
  return rec;
}

// Runs fn(i) for i in [0, count) on `jobs` worker threads; each index is handled exactly once.
template <typename Fn>
void parallel_for(Index count, int jobs, Fn &&fn)
{
  if (jobs <= 1 || count <= 1)
  {
    for (Index i = 0; i < count; ++i)
    {
      fn(i);
    }
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  const int n = static_cast<int>(std::min<Index>(jobs, count));
  for (int w = 0; w < n; ++w)
  {
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++)
      {
        try
        {
          fn(i);
        }
        catch (...)
        {
          if (!failed.exchange(true))
          {
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto &t : pool)
  {
    t.join();
  }
  if (failure)
  {
    std::rethrow_exception(failure);
  }
}

// Protocol (i): fixed r, tolerance indices k_list (default: every k = 1 .. r^2).
template <typename Scalar>
std::vector<TrialRecord> sweep_k(const RomProblem<Scalar> &problem, Index r, int jobs = 1,
                                 const closure::SolverSettings &settings = {}, std::vector<Index> k_list = {})
{
  problem.check_rank(r);
  if (k_list.empty())
  {
    for (Index k = 1; k <= r * r; ++k)
    {
      k_list.push_back(k);
    }
  }
  for (const Index k : k_list)
  {
    if (k < 1 || k > r * r)
    {
      throw ConfigError("sweep_k: k = " + std::to_string(k) + " outside [1, " + std::to_string(r * r) + "]");
    }
  }
  const auto sys = closure::assemble_system<Scalar>(problem.truth_rows(r), problem.targets_for(r));
  const auto ops_r = problem.operators.truncate(r);
  std::vector<TrialRecord> records(k_list.size());
  parallel_for(static_cast<Index>(k_list.size()), jobs, [&](Index idx) {
    const auto i = static_cast<std::size_t>(idx);
    records[i] = run_trial(problem, sys, ops_r, k_list[i], settings);
  });
  return records;
}

struct SweepRResult
{
  std::vector<TrialRecord> best;                    // one per r with at least one ok trial
  std::map<Index, std::vector<TrialRecord>> all;    // every k-trial per r
  std::vector<std::string> warnings;
};

// argmin of E over ok trials; ties go to the smallest k.
inline std::optional<TrialRecord> best_record(const std::vector<TrialRecord> &records)
{
  std::optional<TrialRecord> best;
  for (const auto &rec : records)
  {
    if (!rec.ok())
    {
      continue;
    }
    if (!best || rec.E_L2 < best->E_L2 || (rec.E_L2 == best->E_L2 && rec.k < best->k))
    {
      best = rec;
    }
  }
  return best;
}

inline SweepRResult select_best(std::map<Index, std::vector<TrialRecord>> all)
{
  SweepRResult out;
  for (const auto &[r, records] : all)
  {
    if (auto b = best_record(records))
    {
      out.best.push_back(*b);
    }
    else
    {
      out.warnings.push_back("r = " + std::to_string(r) + ": no successful trial; omitted from the r-sweep");
    }
  }
  out.all = std::move(all);
  return out;
}

// Protocol (ii): for each r, the k that minimizes E.
template <typename Scalar>
SweepRResult sweep_r(const RomProblem<Scalar> &problem, const std::vector<Index> &r_list, int jobs = 1,
                     const closure::SolverSettings &settings = {})
{
  std::map<Index, std::vector<TrialRecord>> all;
  for (const Index r : r_list)
  {
    all[r] = sweep_k(problem, r, jobs, settings);
  }
  return select_best(std::move(all));
}

// OLS fit of log E = alpha log eta + beta over ok records with eta <= threshold.
inline RegressionResult fit_scaling_law(const std::vector<TrialRecord> &records, double eta_threshold = 100.0)
{
  std::vector<std::pair<double, double>> pts;
  std::vector<const TrialRecord *> used;
  for (const auto &rec : records)
  {
    if (rec.ok() && rec.eta_L2 <= eta_threshold && rec.eta_L2 > 0.0 && rec.E_L2 > 0.0)
    {
      used.push_back(&rec);
    }
  }
  // Fixed summation order makes the fit independent of record order.
  std::sort(used.begin(), used.end(), [](const TrialRecord *a, const TrialRecord *b) {
    return std::tie(a->r, a->k, a->eta_L2, a->E_L2) < std::tie(b->r, b->k, b->eta_L2, b->E_L2);
  });
  for (const auto *rec : used)
  {
    pts.emplace_back(std::log(rec->eta_L2), std::log(rec->E_L2));
  }
  if (pts.size() < 2)
  {
    throw InsufficientData("fit_scaling_law: " + std::to_string(pts.size()) +
                           " usable point(s) below the eta threshold; at least 2 required");
  }
  const double n = static_cast<double>(pts.size());
  double mx = 0.0, my = 0.0;
  for (const auto &[x, y] : pts)
  {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto &[x, y] : pts)
  {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0))
  {
    throw InsufficientData("fit_scaling_law: all eta values coincide");
  }
  RegressionResult res;
  res.alpha = sxy / sxx;
  res.beta = my - res.alpha * mx;
  res.n_points = static_cast<Index>(pts.size());
  res.threshold = eta_threshold;
  return res;
}

struct BoundPoint
{
  double lhs = 0.0;
  double rhs = 0.0;
};

//
// Gronwall-type a priori bound for step n = 1 .. M-1:
//   lhs_n = ||e^n||^2 + dt sum_{j<=n} Re^{-1} ||grad e^j||^2
//   rhs_n = exp(dt sum_{j<=n} d_j / (1 - dt d_j)) * dt sum_{j<=n} Re^{-1} eta_j
// with d_j = 27 Re^3 C^4 / 16 ||grad P_r u^j||^4 + Re. Gradient norms use the modal stiffness
// Gram matrix. C_omega is user supplied; the diagnostic is informational.
//
template <typename Scalar>
std::vector<BoundPoint> theorem_bound_diagnostic(const Matrix<Scalar> &truth, const Matrix<Scalar> &rom,
                                                 const Matrix<Scalar> &A_tilde,
                                                 const rom::ClosureTargets<Scalar> &targets,
                                                 const Matrix<Scalar> &stiffness_gram, double dt, double C_omega,
                                                 double Re)
{
  const Index r = truth.rows(), M = truth.cols();
  if (rom.rows() != r || rom.cols() != M || targets.tau.rows() != r || targets.tau.cols() != M ||
      stiffness_gram.rows() < r || A_tilde.rows() != r)
  {
    throw DimensionError("theorem_bound_diagnostic: shape mismatch");
  }
  const Matrix<Scalar> K = stiffness_gram.topLeftCorner(r, r);
  const double inv_re = 1.0 / Re;
  const double c4 = std::pow(C_omega, 4);
  std::vector<BoundPoint> out;
  out.reserve(static_cast<std::size_t>(std::max<Index>(M - 1, 0)));
  double grad_sum = 0.0, eta_sum = 0.0, gronwall = 0.0;
  for (Index j = 1; j < M; ++j)
  {
    const Vector<Scalar> e = truth.col(j) - rom.col(j);
    const double grad_truth_sq = static_cast<double>(truth.col(j).dot(K * truth.col(j)));
    const double dj = 27.0 * Re * Re * Re * c4 / 16.0 * grad_truth_sq * grad_truth_sq + Re;
    if (!(dt * dj < 1.0))
    {
      throw ConfigError("theorem_bound_diagnostic: dt * d_j = " + std::to_string(dt * dj) + " >= 1 at j = " +
                        std::to_string(j));
    }
    gronwall += dj / (1.0 - dt * dj);
    grad_sum += inv_re * static_cast<double>(e.dot(K * e));
    eta_sum += inv_re * static_cast<double>((targets.tau.col(j) + A_tilde * truth.col(j)).squaredNorm());
    BoundPoint p;
    p.lhs = static_cast<double>(e.squaredNorm()) + dt * grad_sum;
    p.rhs = std::exp(dt * gronwall) * (dt * eta_sum);
    out.push_back(p);
  }
  return out;
}

}  // namespace ddvms::verify

#endif  // DDVMS_VERIFY_HPP
