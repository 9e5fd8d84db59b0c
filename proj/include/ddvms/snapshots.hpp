// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_SNAPSHOTS_HPP
#define DDVMS_SNAPSHOTS_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddvms/fe1d.hpp"
#include "ddvms/fom_burgers.hpp"

namespace ddvms
{

// Time-indexed FOM coefficient vectors together with the inner product that defines L^2.
template <typename Scalar>
struct SnapshotSet
{
  fom::Trajectory<Scalar> trajectory;
  fe1d::FeOperators<Scalar> inner_product;
  std::string label;
  std::optional<double> diffusivity;

  Index size() const { return trajectory.size(); }
  Index n_dof() const { return trajectory.states.rows(); }

  double dt() const
  {
    return size() > 1 ? (trajectory.times(size() - 1) - trajectory.times(0)) / static_cast<double>(size() - 1)
                      : 0.0;
  }

  void validate() const
  {
    if (trajectory.times.size() != trajectory.states.cols())
    {
      throw DimensionError("SnapshotSet: times length != snapshot count");
    }
    if (inner_product.mass.size() != n_dof() || inner_product.stiffness.size() != n_dof())
    {
      throw DimensionError("SnapshotSet: inner-product dimension " + std::to_string(inner_product.mass.size()) +
                           " != snapshot dimension " + std::to_string(n_dof()));
    }
    if (size() < 2)
    {
      throw DimensionError("SnapshotSet: at least 2 snapshots required");
    }
  }
};

template <typename Scalar>
SnapshotSet<Scalar> make_snapshot_set(fom::Trajectory<Scalar> traj, const fom::BurgersConfig &cfg,
                                      std::string label = "burgers")
{
  SnapshotSet<Scalar> set;
  set.trajectory = std::move(traj);
  set.inner_product = fe1d::assemble_fe_operators<Scalar>(cfg.mesh);
  set.label = std::move(label);
  set.diffusivity = cfg.nu;
  set.validate();
  return set;
}

namespace detail
{
inline Index nearest_sample(const Vector<double> &times, double t, double dt, const char *which)
{
  const double raw = (t - times(0)) / dt;
  const auto idx = static_cast<Index>(std::llround(raw));
  if (idx < 0 || idx >= times.size() || std::abs(times(idx) - t) > 0.5 * dt * (1.0 + 1e-12))
  {
    throw ConfigError(std::string("trim_window: ") + which + " = " + std::to_string(t) +
                      " does not align with a sample time inside the trajectory window");
  }
  return idx;
}
}  // namespace detail

// Restricts the snapshots to [t_lo, t_hi], both endpoints inclusive.
template <typename Scalar>
SnapshotSet<Scalar> trim_window(const SnapshotSet<Scalar> &set, double t_lo, double t_hi)
{
  set.validate();
  if (!(t_hi >= t_lo))
  {
    throw ConfigError("trim_window: empty window");
  }
  const double dt = set.dt();
  const Index lo = detail::nearest_sample(set.trajectory.times, t_lo, dt, "t_lo");
  const Index hi = detail::nearest_sample(set.trajectory.times, t_hi, dt, "t_hi");
  const Index count = hi - lo + 1;
  if (count < 2)
  {
    throw ConfigError("trim_window: window keeps " + std::to_string(count) + " snapshot(s); at least 2 required");
  }
  SnapshotSet<Scalar> out = set;
  out.trajectory.times = set.trajectory.times.segment(lo, count);
  out.trajectory.states = set.trajectory.states.middleCols(lo, count);
  return out;
}

//
// Coefficient-level data for problems whose FOM is not built here. coeffs holds the truth
// ROM coefficients a_d^n (d x M); closure_targets maps a rank r to its r x M matrix of exact
// closure projections (tau^FOM(u_d^n), phi_i).
//
struct ExternalDataset
{
  std::string label;
  double dt = 0.0;
  MatrixXd coeffs;
  std::map<int, MatrixXd> closure_targets;
  std::optional<MatrixXd> forcing;                 // (f^n, phi_i), d_f x M
  std::optional<MatrixXd> diffusion;               // A, leading block of the G-ROM operator
  std::optional<std::vector<MatrixXd>> convection; // B slices: convection[i](m, k) = B_imk
  std::optional<MatrixXd> stiffness_gram;          // (grad phi_m, grad phi_i), for bound diagnostics
  std::optional<double> reynolds;

  Index dim() const { return coeffs.rows(); }
  Index snapshots() const { return coeffs.cols(); }
  int max_operator_rank() const;
  void validate() const;
};

// Bit-exact binary container: versioned little-endian header, named column-major float64
// blocks with a CRC-32 each, and an embedded JSON metadata record mirrored to <path>.json.
struct Container
{
  std::string kind;
  std::string meta_json = "{}";
  std::map<std::string, MatrixXd> blocks;

  const MatrixXd &block(const std::string &name) const;
};

inline constexpr std::uint32_t kContainerVersion = 1;

void write_container(const std::string &path, const Container &c);
Container read_container(const std::string &path);

void write_dataset(const SnapshotSet<double> &set, const std::string &path);
SnapshotSet<double> read_dataset(const std::string &path);

// External datasets are JSON documents (see README for the schema).
ExternalDataset ingest_external(const std::string &path);
void export_external(const ExternalDataset &ds, const std::string &path);

// Trajectory CSV: one row per time, "t,c0,c1,..." with 17 significant digits.
void write_trajectory_csv(const std::string &path, const Vector<double> &times, const MatrixXd &coeffs);

}  // namespace ddvms

#endif  // DDVMS_SNAPSHOTS_HPP
