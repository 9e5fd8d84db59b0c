// SPDX-License-Identifier: Apache-2.0
//
// ddvms command-line driver. Exit codes: 0 success, 2 usage/config/input errors, 3 numerical
// stage failures.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddvms/pipeline.hpp"

namespace
{

using namespace ddvms;
namespace fs = std::filesystem;

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Common
{
  std::string out_dir = ".";
  int jobs = 1;
};

std::string out_path(const Common &c, const std::string &given, const std::string &fallback)
{
  if (!given.empty())
  {
    return given;
  }
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / fallback).string();
}

integrate::Scheme parse_scheme(const std::string &s)
{
  if (s == "be" || s == "backward_euler")
  {
    return integrate::Scheme::backward_euler;
  }
  if (s == "bdf2" || s == "bdf2_linearized")
  {
    return integrate::Scheme::bdf2_linearized;
  }
  throw ConfigError("unknown scheme '" + s + "' (expected be or bdf2)");
}

void write_basis(const pod::PodBasis<double> &basis, const std::string &path)
{
  Container c;
  c.kind = "pod_basis";
  nlohmann::json meta;
  meta["rank"] = basis.rank();
  meta["rel_threshold"] = basis.rel_threshold;
  c.meta_json = meta.dump();
  c.blocks["modes"] = basis.modes;
  c.blocks["singular_values"] = basis.singular_values;
  c.blocks["all_singular_values"] = basis.all_singular_values;
  write_container(path, c);
}

pod::PodBasis<double> read_basis(const std::string &path)
{
  const Container c = read_container(path);
  if (c.kind != "pod_basis")
  {
    throw FormatError(FormatError::Kind::dimension, path + ": container kind '" + c.kind + "' is not 'pod_basis'");
  }
  pod::PodBasis<double> b;
  b.modes = c.block("modes");
  b.singular_values = c.block("singular_values").col(0);
  b.all_singular_values = c.block("all_singular_values").col(0);
  b.rel_threshold = nlohmann::json::parse(c.meta_json).value("rel_threshold", 1e-12);
  return b;
}

void write_closure(const closure::ClosureMatrix<double> &fit, Index r, const std::string &path)
{
  Container c;
  c.kind = "closure";
  nlohmann::json meta;
  meta["r"] = r;
  meta["k"] = fit.k;
  meta["status"] = fit.ok() ? "converged" : "failed";
  meta["kkt_residual"] = fit.kkt_residual;
  meta["iterations"] = fit.iterations;
  c.meta_json = meta.dump();
  c.blocks["A_tilde"] = fit.A_tilde;
  write_container(path, c);
}

MatrixXd read_closure(const std::string &path)
{
  const Container c = read_container(path);
  if (c.kind != "closure")
  {
    throw FormatError(FormatError::Kind::dimension, path + ": container kind '" + c.kind + "' is not 'closure'");
  }
  return c.block("A_tilde");
}

bool is_snapshot_container(const std::string &path)
{
  std::ifstream in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() != 8 || std::string(magic, 8) != "DDVMSBIN")
  {
    return false;
  }
  return read_container(path).kind == "snapshots";
}

// A dataset is either a snapshot container (POD and targets are computed here) or an
// external/problem dataset carrying coefficients, operators and targets.
verify::RomProblem<double> load_problem(const std::string &path, std::vector<Index> ranks, integrate::Scheme scheme,
                                        const std::string &basis_path = "")
{
  integrate::IntegratorConfig ic;
  ic.scheme = scheme;
  if (is_snapshot_container(path))
  {
    const auto set = read_dataset(path);
    const Index r_max = *std::max_element(ranks.begin(), ranks.end());
    const auto basis =
        basis_path.empty() ? pod::compute_pod(set, pod::RankPolicy::capped(r_max)) : read_basis(basis_path);
    return pipeline::build_problem(set, basis, ranks, ic);
  }
  const auto ds = ingest_external(path);
  return pipeline::build_problem(ds, ic);
}

std::vector<Index> parse_ranks(const std::string &spec)
{
  // "5-20", "8,14,20" or a mix of both.
  std::vector<Index> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    if (item.empty())
    {
      continue;
    }
    const auto dash = item.find('-');
    try
    {
      if (dash != std::string::npos && dash > 0)
      {
        const Index lo = std::stol(item.substr(0, dash));
        const Index hi = std::stol(item.substr(dash + 1));
        if (hi < lo)
        {
          throw ConfigError("empty rank range '" + item + "'");
        }
        for (Index r = lo; r <= hi; ++r)
        {
          out.push_back(r);
        }
      }
      else
      {
        out.push_back(std::stol(item));
      }
    }
    catch (const std::logic_error &)
    {
      throw ConfigError("cannot parse rank list '" + spec + "'");
    }
  }
  for (const Index r : out)
  {
    if (r < 1)
    {
      throw ConfigError("ranks must be >= 1 in '" + spec + "'");
    }
  }
  return out;
}

struct FomArgs
{
  bool desk = false;
  double nu = 1e-2;
  int n_cells = 2048;
  double dt = 5e-4;
  double t_start = 0.0;
  double t_end = 1.0;
  double window_lo = 0.01;
  double window_hi = 1.0;
  std::string output;
};

void add_fom_options(CLI::App *app, FomArgs &a)
{
  app->add_flag("--desk", a.desk, "Scaled-down preset: 256 cells, dt = 2e-3");
  app->add_option("--nu", a.nu, "Viscosity")->capture_default_str();
  app->add_option("--n-cells", a.n_cells, "Number of uniform cells")->capture_default_str();
  app->add_option("--dt", a.dt, "FOM time step")->capture_default_str();
  app->add_option("--t-start", a.t_start, "Start time")->capture_default_str();
  app->add_option("--t-end", a.t_end, "End time")->capture_default_str();
  app->add_option("--window-lo", a.window_lo, "Trim window start (inclusive)")->capture_default_str();
  app->add_option("--window-hi", a.window_hi, "Trim window end (inclusive)")->capture_default_str();
}

void apply_fom_args(const CLI::App *app, const FomArgs &a, pipeline::PipelineConfig &cfg)
{
  if (a.desk)
  {
    cfg.burgers.mesh = fe1d::Mesh1D::uniform(256);
    cfg.burgers.dt = 2e-3;
  }
  const auto given = [&](const char *name) { return app->count(name) > 0; };
  if (given("--nu"))
  {
    cfg.burgers.nu = a.nu;
  }
  if (given("--n-cells"))
  {
    if (a.n_cells < 2)
    {
      throw ConfigError("--n-cells must be >= 2");
    }
    cfg.burgers.mesh = fe1d::Mesh1D::uniform(a.n_cells);
  }
  if (given("--dt"))
  {
    cfg.burgers.dt = a.dt;
  }
  if (given("--t-start"))
  {
    cfg.burgers.t_start = a.t_start;
  }
  if (given("--t-end"))
  {
    cfg.burgers.t_end = a.t_end;
  }
  if (given("--window-lo"))
  {
    cfg.window_lo = a.window_lo;
  }
  if (given("--window-hi"))
  {
    cfg.window_hi = a.window_hi;
  }
}

int run(int argc, char **argv)
{
  CLI::App app{"Data-driven variational multiscale ROM closure fitting and verifiability sweeps"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML config file; [section] names match subcommands, flags win");
  Common common;
  app.add_option("--out-dir", common.out_dir, "Output directory")->envname("DDVMS_OUTPUT_DIR")->capture_default_str();
  app.add_option("-j,--jobs", common.jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);

  // fom
  auto *fom_cmd = app.add_subcommand("fom", "Run the Burgers FOM, trim the window, write a snapshot container");
  FomArgs fom_args;
  add_fom_options(fom_cmd, fom_args);
  fom_cmd->add_option("-o,--output", fom_args.output, "Output container (default <out-dir>/snapshots.ddvs)");
  std::string fom_csv;
  fom_cmd->add_option("--csv", fom_csv, "Also write nodal values per snapshot as CSV");

  // pod
  auto *pod_cmd = app.add_subcommand("pod", "Compute the POD basis of a snapshot container");
  std::string pod_in, pod_out;
  int pod_max_rank = 0;
  double pod_energy = 0.0;
  pod_cmd->add_option("snapshots", pod_in, "Snapshot container")->required();
  pod_cmd->add_option("--max-rank", pod_max_rank, "Keep at most this many modes");
  pod_cmd->add_option("--energy", pod_energy, "Keep the smallest basis capturing this energy fraction");
  pod_cmd->add_option("-o,--output", pod_out, "Basis container (default <out-dir>/basis.ddvs)");

  // targets
  auto *tgt_cmd = app.add_subcommand("targets", "Build truth coefficients, ROM operators and closure targets");
  std::string tgt_in, tgt_basis, tgt_ranks = "8,14,20", tgt_out, tgt_export;
  tgt_cmd->add_option("snapshots", tgt_in, "Snapshot container")->required();
  tgt_cmd->add_option("--basis", tgt_basis, "Precomputed basis container");
  tgt_cmd->add_option("--ranks", tgt_ranks, "Ranks, e.g. 5-20 or 8,14,20")->capture_default_str();
  tgt_cmd->add_option("-o,--output", tgt_out, "Problem container (default <out-dir>/problem.ddvs)");
  tgt_cmd->add_option("--export-external", tgt_export, "Also write the problem as an external JSON dataset");

  // fit
  auto *fit_cmd = app.add_subcommand("fit", "Fit the constrained closure matrix for one (r, k)");
  std::string fit_in, fit_out, fit_basis;
  Index fit_r = 8, fit_k = 0;
  fit_cmd->add_option("dataset", fit_in, "Snapshot container or external dataset")->required();
  fit_cmd->add_option("--basis", fit_basis, "Precomputed basis container");
  fit_cmd->add_option("-r,--rank", fit_r, "ROM dimension")->capture_default_str();
  fit_cmd->add_option("-k", fit_k, "Retained singular triplets (default r^2)");
  fit_cmd->add_option("-o,--output", fit_out, "Closure container (default <out-dir>/closure_r<r>_k<k>.ddvs)");

  // rom
  auto *rom_cmd = app.add_subcommand("rom", "Integrate a G-ROM or closure ROM from the projected initial state");
  std::string rom_in, rom_closure, rom_out, rom_scheme = "be", rom_basis;
  Index rom_r = 8;
  rom_cmd->add_option("dataset", rom_in, "Snapshot container or external dataset")->required();
  rom_cmd->add_option("--basis", rom_basis, "Precomputed basis container");
  rom_cmd->add_option("-r,--rank", rom_r, "ROM dimension")->capture_default_str();
  rom_cmd->add_option("--closure", rom_closure, "Closure container from `fit` (omit for the G-ROM)");
  rom_cmd->add_option("--scheme", rom_scheme, "be or bdf2")->capture_default_str();
  rom_cmd->add_option("-o,--output", rom_out, "Trajectory CSV (default <out-dir>/rom_r<r>.csv)");

  // sweep
  auto *sweep_cmd = app.add_subcommand("sweep", "Run k-sweeps and the r-sweep, write report CSVs");
  std::string sw_in, sw_ranks = "8,14,20", sw_kranks, sw_klist, sw_scheme = "be", sw_basis;
  double sw_eta = 100.0;
  sweep_cmd->add_option("dataset", sw_in, "Snapshot container or external dataset")->required();
  sweep_cmd->add_option("--basis", sw_basis, "Precomputed basis container");
  sweep_cmd->add_option("--ranks", sw_ranks, "r-sweep ranks")->capture_default_str();
  sweep_cmd->add_option("--k-ranks", sw_kranks, "Ranks with a reported k-sweep (default: same as --ranks)");
  sweep_cmd->add_option("--k", sw_klist, "Explicit k list (default: all k = 1..r^2)");
  sweep_cmd->add_option("--eta-threshold", sw_eta, "Regression cutoff on eta")->capture_default_str();
  sweep_cmd->add_option("--scheme", sw_scheme, "be or bdf2")->capture_default_str();

  // reproduce
  auto *rep_cmd = app.add_subcommand("reproduce", "End-to-end Burgers study with artifacts and summary table");
  std::string rep_case = "burgers", rep_scheme = "be", rep_external;
  FomArgs rep_args;
  rep_cmd->add_option("case", rep_case, "burgers or external")->check(CLI::IsMember({"burgers", "external"}));
  add_fom_options(rep_cmd, rep_args);
  rep_cmd->add_option("--external", rep_external, "External dataset for the external case");
  rep_cmd->add_option("--scheme", rep_scheme, "be or bdf2")->capture_default_str();
  std::string rep_ranks, rep_kranks;
  rep_cmd->add_option("--ranks", rep_ranks, "Override the r-sweep ranks");
  rep_cmd->add_option("--k-ranks", rep_kranks, "Override the k-sweep ranks");

  // ingest
  auto *ing_cmd = app.add_subcommand("ingest", "Validate an external dataset and print its shapes");
  std::string ing_in, ing_out;
  ing_cmd->add_option("dataset", ing_in, "External dataset (JSON or container)")->required();
  ing_cmd->add_option("-o,--output", ing_out, "Re-export (JSON if the name ends in .json, else container)");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (fom_cmd->parsed())
  {
    auto cfg = pipeline::PipelineConfig::reference_burgers();
    apply_fom_args(fom_cmd, fom_args, cfg);
    cfg.burgers.validate();
    if (!(cfg.window_hi >= cfg.window_lo) || cfg.window_lo < cfg.burgers.t_start || cfg.window_hi > cfg.burgers.t_end)
    {
      throw ConfigError("window [" + std::to_string(cfg.window_lo) + ", " + std::to_string(cfg.window_hi) +
                        "] lies outside the simulated interval");
    }
    const auto set = pipeline::generate_snapshots(cfg);
    const auto path = out_path(common, fom_args.output, "snapshots.ddvs");
    write_dataset(set, path);
    if (!fom_csv.empty())
    {
      write_trajectory_csv(fom_csv, set.trajectory.times, set.trajectory.states);
    }
    std::cout << "wrote " << path << ": " << set.size() << " snapshots of dimension " << set.n_dof() << "\n";
  }
  else if (pod_cmd->parsed())
  {
    const auto set = read_dataset(pod_in);
    pod::RankPolicy policy = pod::RankPolicy::all_modes();
    if (pod_max_rank > 0)
    {
      policy = pod::RankPolicy::capped(pod_max_rank);
    }
    else if (pod_energy > 0.0)
    {
      policy = pod::RankPolicy::energy(pod_energy);
    }
    const auto basis = pod::compute_pod(set, policy);
    const auto path = out_path(common, pod_out, "basis.ddvs");
    write_basis(basis, path);
    pipeline::write_singular_values_csv(out_path(common, "", "pod_singular_values.csv"), basis.all_singular_values);
    std::cout << "wrote " << path << ": " << basis.rank() << " modes\n";
  }
  else if (tgt_cmd->parsed())
  {
    const auto ranks = parse_ranks(tgt_ranks);
    const auto problem = load_problem(tgt_in, ranks, integrate::Scheme::backward_euler, tgt_basis);
    const auto ds = pipeline::export_problem(problem);
    const auto path = out_path(common, tgt_out, "problem.ddvs");
    export_external(ds, path);
    if (!tgt_export.empty())
    {
      export_external(ds, tgt_export);
    }
    std::cout << "wrote " << path << ": d = " << ds.dim() << ", M = " << ds.snapshots() << ", "
              << ds.closure_targets.size() << " target rank(s)\n";
  }
  else if (fit_cmd->parsed())
  {
    const auto problem = load_problem(fit_in, {fit_r}, integrate::Scheme::backward_euler, fit_basis);
    problem.check_rank(fit_r);
    const Index k = fit_k > 0 ? fit_k : fit_r * fit_r;
    const auto sys = closure::assemble_system<double>(problem.truth_rows(fit_r), problem.targets_for(fit_r));
    const auto fit = closure::solve_constrained(closure::truncated_svd(sys, k));
    const auto tag = "r" + std::to_string(fit_r) + "_k" + std::to_string(k);
    const auto path = out_path(common, fit_out, "closure_" + tag + ".ddvs");
    write_closure(fit, fit_r, path);
    pipeline::write_singular_values_csv(out_path(common, "", "E_singular_values_r" + std::to_string(fit_r) + ".csv"),
                                        sys.singular_values());
    std::cout << "cond(E^T E) = " << sys.cond_EtE << "\n";
    std::cout << "status = " << (fit.ok() ? "converged" : "failed") << ", kkt = " << fit.kkt_residual << "\n";
    if (fit.ok())
    {
      std::cout << "eta = " << verify::closure_error_eta(problem.targets_for(fit_r), fit.A_tilde, sys.truth) << "\n";
    }
    else
    {
      std::cout << "reason: " << fit.failure_reason << "\n";
    }
    std::cout << "wrote " << path << "\n";
  }
  else if (rom_cmd->parsed())
  {
    auto problem = load_problem(rom_in, {rom_r}, parse_scheme(rom_scheme), rom_basis);
    problem.check_rank(rom_r);
    const auto ops = problem.operators.truncate(rom_r);
    std::optional<MatrixXd> A_tilde;
    if (!rom_closure.empty())
    {
      A_tilde = read_closure(rom_closure);
    }
    const MatrixXd truth = problem.truth_rows(rom_r);
    const MatrixXd traj = integrate::run_rom<double>(truth.col(0), ops, A_tilde ? &*A_tilde : nullptr,
                                                     problem.integrator, truth.cols() - 1);
    const auto path = out_path(common, rom_out, "rom_r" + std::to_string(rom_r) + ".csv");
    write_trajectory_csv(path, problem.times, traj);
    std::cout << "E = " << verify::rom_error_E<double>(truth, traj) << "\n";
    std::cout << "wrote " << path << "\n";
  }
  else if (sweep_cmd->parsed())
  {
    pipeline::PipelineConfig cfg;
    cfg.r_list = parse_ranks(sw_ranks);
    cfg.k_sweep_ranks = sw_kranks.empty() ? cfg.r_list : parse_ranks(sw_kranks);
    cfg.k_list = sw_klist.empty() ? std::vector<Index>{} : parse_ranks(sw_klist);
    cfg.eta_threshold = sw_eta;
    cfg.scheme = parse_scheme(sw_scheme);
    cfg.output_dir = common.out_dir;
    cfg.jobs = common.jobs;
    cfg.problem = pipeline::ProblemKind::external;
    cfg.external_path = sw_in;
    cfg.validate();
    const auto problem = load_problem(sw_in, cfg.all_ranks(), cfg.scheme, sw_basis);
    const auto rep = pipeline::run_sweeps(problem, cfg);
    std::cout << rep.table();
  }
  else if (rep_cmd->parsed())
  {
    auto cfg = rep_args.desk ? pipeline::PipelineConfig::desk_burgers() : pipeline::PipelineConfig::reference_burgers();
    apply_fom_args(rep_cmd, rep_args, cfg);
    if (rep_case == "external")
    {
      cfg.problem = pipeline::ProblemKind::external;
      cfg.external_path = rep_external;
    }
    if (!rep_ranks.empty())
    {
      cfg.r_list = parse_ranks(rep_ranks);
    }
    if (!rep_kranks.empty())
    {
      cfg.k_sweep_ranks = parse_ranks(rep_kranks);
    }
    cfg.scheme = parse_scheme(rep_scheme);
    cfg.output_dir = common.out_dir;
    cfg.jobs = common.jobs;
    const auto res = pipeline::reproduce(cfg);
    std::cout << res.summary;
  }
  else if (ing_cmd->parsed())
  {
    const auto ds = ingest_external(ing_in);
    std::cout << "label: " << ds.label << "\n";
    std::cout << "d = " << ds.dim() << ", M = " << ds.snapshots() << ", dt = " << ds.dt << "\n";
    std::cout << "closure target ranks:";
    for (const auto &[r, tau] : ds.closure_targets)
    {
      std::cout << " " << r;
    }
    std::cout << "\noperator rank: " << ds.max_operator_rank() << "\n";
    if (!ing_out.empty())
    {
      export_external(ds, ing_out);
      std::cout << "wrote " << ing_out << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  try
  {
    return run(argc, argv);
  }
  catch (const ddvms::pipeline::StageError &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return e.numerical ? kExitNumerical : kExitUsage;
  }
  catch (const ddvms::NumericalError &e)
  {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  catch (const ddvms::Error &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  catch (const std::filesystem::filesystem_error &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
