// SPDX-License-Identifier: Apache-2.0

#include "ddvms/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ddvms::pipeline
{
namespace
{

std::ofstream open_out(const std::string &path, bool append = false)
{
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out)
  {
    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "' for writing");
  }
  out << std::setprecision(17);
  return out;
}

std::string join(const std::filesystem::path &dir, const std::string &name) { return (dir / name).string(); }

template <typename Fn>
auto stage(const std::string &name, Fn &&fn) -> decltype(fn())
{
  try
  {
    return fn();
  }
  catch (const StageError &)
  {
    throw;
  }
  catch (const NumericalError &e)
  {
    throw StageError(name, e.what(), true);
  }
  catch (const Error &e)
  {
    throw StageError(name, e.what(), false);
  }
}

}  // namespace

void PipelineConfig::validate() const
{
  if (r_list.empty())
  {
    throw ConfigError("PipelineConfig: r_list must not be empty");
  }
  for (const Index r : all_ranks())
  {
    if (r < 1)
    {
      throw ConfigError("PipelineConfig: ranks must be >= 1");
    }
  }
  for (const Index k : k_list)
  {
    if (k < 1)
    {
      throw ConfigError("PipelineConfig: k values must be >= 1");
    }
  }
  if (!(eta_threshold > 0.0))
  {
    throw ConfigError("PipelineConfig: eta_threshold must be > 0");
  }
  if (jobs < 1)
  {
    throw ConfigError("PipelineConfig: jobs must be >= 1");
  }
  if (problem == ProblemKind::burgers)
  {
    burgers.validate();
    if (!(window_hi >= window_lo) || window_lo < burgers.t_start || window_hi > burgers.t_end)
    {
      throw ConfigError("PipelineConfig: window [" + std::to_string(window_lo) + ", " + std::to_string(window_hi) +
                        "] is not inside the simulated interval");
    }
  }
  else if (external_path.empty())
  {
    throw ConfigError("PipelineConfig: external problem needs a dataset path");
  }
}

std::vector<Index> PipelineConfig::all_ranks() const
{
  std::set<Index> s(r_list.begin(), r_list.end());
  s.insert(k_sweep_ranks.begin(), k_sweep_ranks.end());
  return {s.begin(), s.end()};
}

PipelineConfig PipelineConfig::reference_burgers()
{
  PipelineConfig cfg;
  cfg.burgers = fom::BurgersConfig{};
  cfg.window_lo = 0.01;
  cfg.window_hi = 1.0;
  for (Index r = 5; r <= 20; ++r)
  {
    cfg.r_list.push_back(r);
  }
  cfg.k_sweep_ranks = {8, 14, 20};
  return cfg;
}

PipelineConfig PipelineConfig::desk_burgers()
{
  PipelineConfig cfg;
  cfg.burgers.mesh = fe1d::Mesh1D::uniform(256);
  cfg.burgers.dt = 2e-3;
  cfg.window_lo = 0.01;
  cfg.window_hi = 1.0;
  for (Index r = 3; r <= 10; ++r)
  {
    cfg.r_list.push_back(r);
  }
  cfg.k_sweep_ranks = {6, 8, 10};
  return cfg;
}

SnapshotSet<double> generate_snapshots(const PipelineConfig &cfg)
{
  cfg.burgers.validate();
  auto traj = fom::run<double>(cfg.burgers);
  auto set = make_snapshot_set(std::move(traj), cfg.burgers, "burgers");
  return trim_window(set, cfg.window_lo, cfg.window_hi);
}

integrate::IntegratorConfig integrator_for(const PipelineConfig &cfg, double dt)
{
  integrate::IntegratorConfig ic;
  ic.scheme = cfg.scheme;
  ic.dt = dt;
  return ic;
}

verify::RomProblem<double> build_problem(const SnapshotSet<double> &set, const pod::PodBasis<double> &basis,
                                         const std::vector<Index> &ranks,
                                         const integrate::IntegratorConfig &integrator)
{
  if (ranks.empty())
  {
    throw ConfigError("build_problem: no ranks requested");
  }
  const Index r_max = *std::max_element(ranks.begin(), ranks.end());
  if (r_max > basis.rank())
  {
    throw ConfigError("build_problem: r = " + std::to_string(r_max) + " exceeds the POD rank " +
                      std::to_string(basis.rank()));
  }
  if (!set.diffusivity)
  {
    throw ConfigError("build_problem: snapshot set carries no diffusivity");
  }
  verify::RomProblem<double> p;
  p.label = set.label;
  p.truth = pod::project_coefficients(basis, set, r_max);
  p.operators = rom::assemble_rom_operators(basis, set.inner_product, r_max, *set.diffusivity);
  const MatrixXd fom_conv = fe1d::convection_vectors<double>(set.trajectory.states, set.inner_product.mesh);
  for (const Index r : ranks)
  {
    p.targets[r] = rom::compute_closure_targets(set, basis, r, fom_conv);
  }
  p.times = set.trajectory.times;
  p.dt = set.dt();
  p.integrator = integrator;
  p.integrator.dt = p.dt;
  const auto Phi = basis.modes.leftCols(r_max);
  MatrixXd G = Phi.transpose() * set.inner_product.stiffness.apply(MatrixXd(Phi));
  p.stiffness_gram = (0.5 * (G + G.transpose())).eval();
  p.reynolds = 1.0 / *set.diffusivity;
  return p;
}

verify::RomProblem<double> build_problem(const ExternalDataset &ds, const integrate::IntegratorConfig &integrator)
{
  ds.validate();
  if (!ds.diffusion || !ds.convection)
  {
    throw SchemaError(!ds.diffusion ? "diffusion" : "convection", "required to run reduced-order models");
  }
  const Index r_ops = ds.max_operator_rank();
  if (r_ops < 1)
  {
    throw SchemaError("diffusion", "operator blocks are empty");
  }
  verify::RomProblem<double> p;
  p.label = ds.label;
  p.truth = ds.coeffs.topRows(std::min<Index>(ds.dim(), r_ops));
  rom::RomOperators<double> ops;
  ops.A = *ds.diffusion;
  ops.B.slices = *ds.convection;
  if (ds.forcing)
  {
    ops.forcing = MatrixXd::Zero(ops.A.rows(), ds.snapshots());
    ops.forcing.topRows(ds.forcing->rows()) = *ds.forcing;
  }
  p.operators = ops.truncate(r_ops);
  for (const auto &[r, tau] : ds.closure_targets)
  {
    p.targets[r] = rom::ClosureTargets<double>{tau};
  }
  p.times = VectorXd::LinSpaced(ds.snapshots(), 0.0, ds.dt * static_cast<double>(ds.snapshots() - 1));
  p.dt = ds.dt;
  p.integrator = integrator;
  p.integrator.dt = ds.dt;
  p.stiffness_gram = ds.stiffness_gram;
  p.reynolds = ds.reynolds;
  return p;
}

ExternalDataset export_problem(const verify::RomProblem<double> &problem)
{
  ExternalDataset ds;
  ds.label = problem.label;
  ds.dt = problem.dt;
  ds.coeffs = problem.truth;
  for (const auto &[r, t] : problem.targets)
  {
    ds.closure_targets[static_cast<int>(r)] = t.tau;
  }
  ds.diffusion = problem.operators.A;
  ds.convection = problem.operators.B.slices;
  if (problem.operators.forcing.size() != 0)
  {
    ds.forcing = problem.operators.forcing;
  }
  ds.stiffness_gram = problem.stiffness_gram;
  ds.reynolds = problem.reynolds;
  return ds;
}

void write_trials_csv(const std::string &path, const std::vector<verify::TrialRecord> &records)
{
  auto out = open_out(path);
  out << "r,k,E_L2,eta_L2,cond,status,dissipativity_min\n";
  for (const auto &rec : records)
  {
    out << rec.r << "," << rec.k << ",";
    if (rec.ok())
    {
      out << rec.E_L2 << "," << rec.eta_L2;
    }
    else
    {
      out << "nan,nan";
    }
    out << "," << rec.cond_EtE << "," << verify::to_string(rec.status) << ",";
    if (rec.ok())
    {
      out << rec.dissipativity_min;
    }
    else
    {
      out << "nan";
    }
    out << "\n";
  }
}

void write_regression_csv(const std::string &path, const std::vector<RegressionRow> &rows)
{
  auto out = open_out(path);
  out << "protocol,r,alpha,beta,n_points,eta_threshold,note\n";
  for (const auto &row : rows)
  {
    out << row.protocol << "," << row.r << ",";
    if (row.fit)
    {
      out << row.fit->alpha << "," << row.fit->beta << "," << row.fit->n_points << "," << row.fit->threshold;
    }
    else
    {
      out << "nan,nan,0,nan";
    }
    out << "," << row.note << "\n";
  }
}

void write_plot_csv(const std::string &path, const std::string &protocol,
                    const std::vector<verify::TrialRecord> &records, double eta_threshold, bool append)
{
  auto out = open_out(path, append);
  if (!append)
  {
    out << "protocol,r,k,eta_L2,E_L2,log10_eta,log10_E,in_fit\n";
  }
  for (const auto &rec : records)
  {
    if (!rec.ok() || !(rec.eta_L2 > 0.0) || !(rec.E_L2 > 0.0))
    {
      continue;
    }
    out << protocol << "," << rec.r << "," << rec.k << "," << rec.eta_L2 << "," << rec.E_L2 << ","
        << std::log10(rec.eta_L2) << "," << std::log10(rec.E_L2) << "," << (rec.eta_L2 <= eta_threshold ? 1 : 0)
        << "\n";
  }
}

void write_singular_values_csv(const std::string &path, const Vector<double> &values)
{
  auto out = open_out(path);
  out << "index,sigma\n";
  for (Index i = 0; i < values.size(); ++i)
  {
    out << i + 1 << "," << values(i) << "\n";
  }
}

double SweepReport::min_dissipativity() const
{
  double m = std::numeric_limits<double>::infinity();
  for (const auto &rec : all_trials)
  {
    if (rec.ok())
    {
      m = std::min(m, rec.dissipativity_min);
    }
  }
  return m;
}

std::string SweepReport::table() const
{
  std::ostringstream os;
  os << std::setprecision(4);
  os << "k-sweeps (eta <= threshold)\n";
  os << "  " << std::setw(4) << "r" << std::setw(14) << "cond(E^T E)" << std::setw(8) << "trials" << std::setw(6)
     << "ok" << std::setw(8) << "failed" << std::setw(8) << "blowup" << std::setw(8) << "points" << std::setw(10)
     << "slope" << std::setw(14) << "min dissip" << "\n";
  for (const auto &rs : k_sweeps)
  {
    os << "  " << std::setw(4) << rs.r << std::setw(14) << rs.cond_EtE << std::setw(8) << rs.n_trials << std::setw(6)
       << rs.n_ok << std::setw(8) << rs.n_solver_failed << std::setw(8) << rs.n_blow_up << std::setw(8)
       << (rs.fit ? rs.fit->n_points : 0) << std::setw(10);
    if (rs.fit)
    {
      os << rs.fit->alpha;
    }
    else
    {
      os << "n/a";
    }
    os << std::setw(14) << rs.dissipativity_min << "\n";
  }
  os << "r-sweep\n";
  for (const auto &rec : r_best)
  {
    os << "  r=" << rec.r << " k=" << rec.k << " E=" << rec.E_L2 << " eta=" << rec.eta_L2 << "\n";
  }
  if (r_fit)
  {
    os << "  slope " << r_fit->alpha << " intercept " << r_fit->beta << " over " << r_fit->n_points << " points\n";
  }
  else
  {
    os << "  slope n/a: " << r_note << "\n";
  }
  os << "min mean-dissipativity over ok trials: " << min_dissipativity() << "\n";
  for (const auto &w : warnings)
  {
    os << "warning: " << w << "\n";
  }
  return os.str();
}

SweepReport run_sweeps(const verify::RomProblem<double> &problem, const PipelineConfig &cfg)
{
  std::set<Index> ranks(cfg.r_list.begin(), cfg.r_list.end());
  ranks.insert(cfg.k_sweep_ranks.begin(), cfg.k_sweep_ranks.end());

  std::map<Index, std::vector<verify::TrialRecord>> all;
  for (const Index r : ranks)
  {
    std::vector<Index> ks;
    for (const Index k : cfg.k_list)
    {
      if (k <= r * r)
      {
        ks.push_back(k);
      }
    }
    if (!cfg.k_list.empty() && ks.empty())
    {
      continue;
    }
    all[r] = verify::sweep_k(problem, r, cfg.jobs, closure::SolverSettings{}, ks);
  }

  SweepReport rep;
  for (const auto &[r, recs] : all)
  {
    rep.all_trials.insert(rep.all_trials.end(), recs.begin(), recs.end());
  }
  std::sort(rep.all_trials.begin(), rep.all_trials.end(),
            [](const auto &a, const auto &b) { return std::tie(a.r, a.k) < std::tie(b.r, b.k); });

  for (const Index r : cfg.k_sweep_ranks)
  {
    const auto it = all.find(r);
    if (it == all.end())
    {
      continue;
    }
    RankSummary rs;
    rs.r = r;
    rs.n_trials = static_cast<Index>(it->second.size());
    rs.dissipativity_min = std::numeric_limits<double>::infinity();
    for (const auto &rec : it->second)
    {
      rs.cond_EtE = rec.cond_EtE;
      rs.n_ok += rec.ok() ? 1 : 0;
      rs.n_solver_failed += rec.status == verify::TrialStatus::solver_failed ? 1 : 0;
      rs.n_blow_up += rec.status == verify::TrialStatus::blow_up ? 1 : 0;
      if (rec.ok())
      {
        rs.dissipativity_min = std::min(rs.dissipativity_min, rec.dissipativity_min);
      }
    }
    try
    {
      rs.fit = verify::fit_scaling_law(it->second, cfg.eta_threshold);
    }
    catch (const InsufficientData &e)
    {
      rs.note = e.what();
      rep.warnings.push_back("k-sweep r = " + std::to_string(r) + ": " + e.what());
    }
    rep.k_sweeps.push_back(rs);
  }

  std::map<Index, std::vector<verify::TrialRecord>> r_all;
  for (const Index r : cfg.r_list)
  {
    if (const auto it = all.find(r); it != all.end())
    {
      r_all[r] = it->second;
    }
  }
  auto sr = verify::select_best(std::move(r_all));
  rep.r_best = sr.best;
  rep.warnings.insert(rep.warnings.end(), sr.warnings.begin(), sr.warnings.end());
  try
  {
    rep.r_fit = verify::fit_scaling_law(rep.r_best, cfg.eta_threshold);
  }
  catch (const InsufficientData &e)
  {
    rep.r_note = e.what();
    rep.warnings.push_back(std::string("r-sweep: ") + e.what());
  }

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_trials_csv(join(dir, "trials.csv"), rep.all_trials);
  write_trials_csv(join(dir, "rsweep.csv"), rep.r_best);
  std::vector<RegressionRow> rows;
  for (const auto &rs : rep.k_sweeps)
  {
    rows.push_back({"k_sweep", rs.r, rs.fit, rs.note});
  }
  rows.push_back({"r_sweep", 0, rep.r_fit, rep.r_note});
  write_regression_csv(join(dir, "regression.csv"), rows);
  bool append = false;
  for (const auto &rs : rep.k_sweeps)
  {
    write_plot_csv(join(dir, "plot_data.csv"), "k_sweep", all.at(rs.r), cfg.eta_threshold, append);
    append = true;
  }
  write_plot_csv(join(dir, "plot_data.csv"), "r_sweep", rep.r_best, cfg.eta_threshold, append);
  return rep;
}

ReproduceResult reproduce(const PipelineConfig &cfg)
{
  stage("config", [&] {
    cfg.validate();
    return 0;
  });
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);

  ReproduceResult res;
  verify::RomProblem<double> problem;
  if (cfg.problem == ProblemKind::external)
  {
    const auto ds = stage("ingest", [&] { return ingest_external(cfg.external_path); });
    problem = stage("targets", [&] { return build_problem(ds, integrator_for(cfg, ds.dt)); });
    res.n_snapshots = res.n_snapshots_full = ds.snapshots();
  }
  else
  {
    const auto full = stage("fom", [&] {
      auto traj = fom::run<double>(cfg.burgers);
      return make_snapshot_set(std::move(traj), cfg.burgers, "burgers");
    });
    res.n_snapshots_full = full.size();
    const auto set = stage("fom", [&] { return trim_window(full, cfg.window_lo, cfg.window_hi); });
    res.n_snapshots = set.size();
    stage("fom", [&] {
      write_dataset(set, join(dir, "snapshots.ddvs"));
      return 0;
    });
    const auto ranks = cfg.all_ranks();
    const Index r_max = ranks.back();
    const auto basis = stage("pod", [&] { return pod::compute_pod(set, pod::RankPolicy::capped(r_max)); });
    res.pod_singular_values = basis.all_singular_values;
    stage("pod", [&] {
      write_singular_values_csv(join(dir, "pod_singular_values.csv"), basis.all_singular_values);
      return 0;
    });
    problem = stage("targets", [&] { return build_problem(set, basis, ranks, integrator_for(cfg, set.dt())); });
  }

  for (const Index r : cfg.k_sweep_ranks)
  {
    stage("fit", [&] {
      problem.check_rank(r);
      const auto sys = closure::assemble_system<double>(problem.truth_rows(r), problem.targets_for(r));
      write_singular_values_csv(join(dir, "E_singular_values_r" + std::to_string(r) + ".csv"), sys.singular_values());
      return 0;
    });
  }
  res.report = stage("sweep", [&] { return run_sweeps(problem, cfg); });

  std::ostringstream os;
  os << "problem: " << problem.label << "\n";
  os << "snapshots: " << res.n_snapshots_full << " generated, " << res.n_snapshots << " used\n";
  os << res.report.table();
  res.summary = os.str();
  stage("report", [&] {
    auto out = open_out(join(dir, "summary.txt"));
    out << res.summary;
    return 0;
  });
  return res;
}

}  // namespace ddvms::pipeline
