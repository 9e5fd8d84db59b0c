// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_PIPELINE_HPP
#define DDVMS_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "ddvms/pod.hpp"
#include "ddvms/snapshots.hpp"
#include "ddvms/verify.hpp"

namespace ddvms::pipeline
{

// A failure inside reproduce(), tagged with the stage that raised it.
class StageError : public Error
{
public:
  StageError(std::string stage, const std::string &what, bool numerical)
    : Error("stage '" + stage + "': " + what), stage(std::move(stage)), numerical(numerical)
  {
  }
  std::string stage;
  bool numerical;
};

enum class ProblemKind
{
  burgers,
  external,
};

struct PipelineConfig
{
  ProblemKind problem = ProblemKind::burgers;
  std::string external_path;
  fom::BurgersConfig burgers;
  double window_lo = 0.01;
  double window_hi = 1.0;
  std::vector<Index> r_list;         // ranks of the r-sweep
  std::vector<Index> k_sweep_ranks;  // ranks that get a full k-sweep report
  std::vector<Index> k_list;         // empty: every k = 1 .. r^2
  double eta_threshold = 100.0;
  integrate::Scheme scheme = integrate::Scheme::backward_euler;
  std::string output_dir = ".";
  int jobs = 1;
  // Nothing in the pipeline draws random numbers; kept so configs can state it explicitly.
  bool deterministic = true;

  void validate() const;

  // All ranks that need closure targets (union of r_list and k_sweep_ranks, sorted).
  std::vector<Index> all_ranks() const;

  static PipelineConfig reference_burgers();
  static PipelineConfig desk_burgers();
};

// FOM run followed by the window trim.
SnapshotSet<double> generate_snapshots(const PipelineConfig &cfg);

integrate::IntegratorConfig integrator_for(const PipelineConfig &cfg, double dt);

// Truth coefficients, Galerkin operators, and closure targets for every rank in `ranks`.
verify::RomProblem<double> build_problem(const SnapshotSet<double> &set, const pod::PodBasis<double> &basis,
                                         const std::vector<Index> &ranks,
                                         const integrate::IntegratorConfig &integrator);

verify::RomProblem<double> build_problem(const ExternalDataset &ds, const integrate::IntegratorConfig &integrator);

ExternalDataset export_problem(const verify::RomProblem<double> &problem);

// Report writers. Numbers use 17 significant digits; no timestamps are written.
void write_trials_csv(const std::string &path, const std::vector<verify::TrialRecord> &records);

struct RegressionRow
{
  std::string protocol;  // "k_sweep" or "r_sweep"
  Index r = 0;           // 0 for the r-sweep
  std::optional<verify::RegressionResult> fit;
  std::string note;
};

void write_regression_csv(const std::string &path, const std::vector<RegressionRow> &rows);

void write_plot_csv(const std::string &path, const std::string &protocol,
                    const std::vector<verify::TrialRecord> &records, double eta_threshold, bool append = false);

void write_singular_values_csv(const std::string &path, const Vector<double> &values);

struct RankSummary
{
  Index r = 0;
  double cond_EtE = 0.0;
  Index n_trials = 0;
  Index n_ok = 0;
  Index n_solver_failed = 0;
  Index n_blow_up = 0;
  double dissipativity_min = 0.0;
  std::optional<verify::RegressionResult> fit;
  std::string note;
};

struct SweepReport
{
  std::vector<RankSummary> k_sweeps;
  std::vector<verify::TrialRecord> r_best;
  std::optional<verify::RegressionResult> r_fit;
  std::string r_note;
  std::vector<std::string> warnings;
  std::vector<verify::TrialRecord> all_trials;  // every k-trial, sorted by (r, k)

  double min_dissipativity() const;
  std::string table() const;
};

// Runs both protocols on a prepared problem and writes trials.csv, rsweep.csv, regression.csv
// and plot_data.csv into cfg.output_dir.
SweepReport run_sweeps(const verify::RomProblem<double> &problem, const PipelineConfig &cfg);

struct ReproduceResult
{
  Index n_snapshots_full = 0;
  Index n_snapshots = 0;
  Vector<double> pod_singular_values;
  SweepReport report;
  std::string summary;
};

// FOM -> POD -> targets -> sweeps -> regressions, with every artifact written to output_dir.
ReproduceResult reproduce(const PipelineConfig &cfg);

}  // namespace ddvms::pipeline

#endif  // DDVMS_PIPELINE_HPP
