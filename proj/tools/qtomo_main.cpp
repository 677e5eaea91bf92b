// qtomo: simulate homodyne-tomography experiments, reconstruct states by
// maximum likelihood, and diagnose what the data can actually determine.
//
// Subcommands: simulate, reconstruct, diagnose, pipeline. All outputs are
// deterministic for a given config and seed; files are written atomically.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qtomo/qtomo.hpp"

namespace fs = std::filesystem;
using namespace qtomo;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> dim;
  std::optional<int> restarts;
  bool pure = false;
  bool diagonal = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_solver_flags) {
  cmd->add_option("--config", a.config_path, "experiment config JSON (defaults when omitted)");
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--seed", a.seed, "override config seed");
  cmd->add_option("--mode", a.mode, "override mode: tomography | random-phase")
      ->check(CLI::IsMember({"tomography", "random-phase"}));
  cmd->add_option("--dim", a.dim, "override Fock truncation dimension");
  if (with_solver_flags) {
    cmd->add_option("--restarts", a.restarts, "override solver restarts");
    cmd->add_flag("--pure", a.pure, "pure-state solver (tomography mode)");
    cmd->add_flag("--diagonal", a.diagonal, "diagonal EM solver (random-phase mode)");
  }
}

int env_threads() {
  const char* v = std::getenv("MAXLIK_TOMO_THREADS");
  if (!v || !*v) return 1;
  try {
    const int n = std::stoi(v);
    if (n < 1) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("MAXLIK_TOMO_THREADS must be a positive integer");
  }
}

ExperimentConfig resolve_config(const CommonArgs& a) {
  ExperimentConfig c =
      a.config_path.empty() ? ExperimentConfig::defaults() : load_config(a.config_path);
  if (a.seed) c.seed = *a.seed;
  if (a.mode) c.mode = (*a.mode == "tomography") ? RunMode::Tomography : RunMode::RandomPhase;
  if (a.dim) {
    if (*a.dim < 2) throw ConfigError("--dim must be >= 2");
    c.dim = *a.dim;
  }
  if (a.restarts) {
    if (*a.restarts < 0) throw ConfigError("--restarts must be >= 0");
    c.solver.restarts = *a.restarts;
  }
  c.solver.max_threads = env_threads();
  return c;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d_%H%M%S", &tm);
  return buf;
}

json meta_json(const ExperimentConfig& c, const HomodyneRun& run) {
  return json{{"config", to_json(c)},
              {"mode", c.mode == RunMode::Tomography ? "tomography" : "random-phase"},
              {"seed", c.seed},
              {"requested_records", run.requested},
              {"retained_records", run.data.total},
              {"discarded", run.discarded},
              {"discarded_fraction", run.discarded_fraction},
              {"window_warning", run.window_warning}};
}

HomodyneRun run_simulation(const ExperimentConfig& c) {
  const BinGrid grid = make_bin_grid(c.grid);
  const StateVector state = make_state(c.state, FockDim(c.dim));
  if (c.mode == RunMode::Tomography)
    return simulate_homodyne(state, grid, c.records_per_phase, c.seed);
  return simulate_random_phase(state, grid, total_records(c), c.seed);
}

int cmd_simulate(const CommonArgs& a) {
  const ExperimentConfig c = resolve_config(a);
  const BinGrid grid = make_bin_grid(c.grid);
  const HomodyneRun run = run_simulation(c);

  const fs::path out(a.out_dir);
  atomic_write_file(out / "histogram.csv", histogram_csv(grid, run.data.counts, c.mode));
  write_json_atomic(out / "simulate_meta.json", meta_json(c, run));
  if (run.window_warning)
    std::cerr << "warning: " << 100.0 * run.discarded_fraction
              << "% of samples fell outside the scan window\n";
  std::cout << (out / "histogram.csv").string() << "\n"
            << (out / "simulate_meta.json").string() << "\n";
  return 0;
}

struct ReconstructionArtifacts {
  ReconstructionResult result;
  ProjectorSet retained_ps;
  FrequencyData retained_fd;
};

ReconstructionArtifacts reconstruct_from_counts(const ExperimentConfig& c,
                                                const std::vector<std::int64_t>& counts,
                                                bool pure, bool diagonal) {
  const BinGrid grid = make_bin_grid(c.grid);
  if (c.mode == RunMode::RandomPhase && pure)
    throw ConfigError("--pure requires tomography mode");
  if (c.mode == RunMode::Tomography && diagonal)
    throw ConfigError("--diagonal requires random-phase mode");

  ProjectorSet ps = (c.mode == RunMode::Tomography)
                        ? build_tomography_projectors(grid, FockDim(c.dim))
                        : build_random_phase_povm(grid, FockDim(c.dim));
  FrequencyData fd;
  try {
    fd = make_frequency_data(counts);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("histogram: ") + e.what());
  }
  auto [rps, rfd] = drop_empty_bins(ps, fd);

  ReconstructionArtifacts art;
  if (c.mode == RunMode::RandomPhase)
    art.result = solve_diagonal(rps, rfd, c.solver);
  else if (pure)
    art.result = solve_pure(rps, rfd, c.solver);
  else
    art.result = solve_mixed(rps, rfd, c.solver);
  art.retained_ps = std::move(rps);
  art.retained_fd = std::move(rfd);
  return art;
}

int cmd_reconstruct(const CommonArgs& a, const std::string& histogram_path) {
  const ExperimentConfig c = resolve_config(a);
  const BinGrid grid = make_bin_grid(c.grid);
  const auto counts = read_histogram_csv(histogram_path, grid, c.mode);
  const auto art = reconstruct_from_counts(c, counts, a.pure, a.diagonal);

  const fs::path out(a.out_dir);
  write_json_atomic(out / "result.json",
                    reconstruction_to_json(art.result, art.retained_ps.size(),
                                           art.retained_fd.total));
  if (!art.result.converged)
    std::cerr << "note: solver did not reach tolerance (residual "
              << art.result.extremal_residual << "); result flagged converged=false\n";
  std::cout << (out / "result.json").string() << "\n";
  return 0;
}

int cmd_diagnose(const CommonArgs& a, const std::string& histogram_path,
                 const std::string& result_path) {
  const ExperimentConfig c = resolve_config(a);
  const BinGrid grid = make_bin_grid(c.grid);
  const auto counts = read_histogram_csv(histogram_path, grid, c.mode);

  const json result_json = load_json(result_path);
  if (!result_json.contains("rho")) throw DataError("result JSON has no 'rho' field");
  const Eigen::MatrixXcd rho = matrix_from_json(result_json.at("rho"));
  if (rho.rows() != c.dim)
    throw DataError("result rho dim " + std::to_string(rho.rows()) +
                    " does not match config dim " + std::to_string(c.dim));

  ProjectorSet ps = (c.mode == RunMode::Tomography)
                        ? build_tomography_projectors(grid, FockDim(c.dim))
                        : build_random_phase_povm(grid, FockDim(c.dim));
  FrequencyData fd;
  try {
    fd = make_frequency_data(counts);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("histogram: ") + e.what());
  }
  auto [rps, rfd] = drop_empty_bins(ps, fd);

  // Resolution of identity achieved by the scan itself (all weights at the
  // perfect-fit value 1, every scanned bin included) next to the overlap
  // operator of the data-renormalized projectors at the reconstructed state.
  const SubspaceReport resolution = recoverable_subspace(completeness_operator(ps));
  const SubspaceReport fit_weighted = recoverable_subspace(r_operator(rho, rps, rfd));

  // Random-phase transfer function over the registered coordinate bins.
  ProjectorSet povm = build_random_phase_povm(grid, FockDim(c.dim));
  std::vector<std::int64_t> xcounts(static_cast<std::size_t>(grid.n_bins), 0);
  for (std::size_t i = 0; i < counts.size(); ++i)
    xcounts[i % static_cast<std::size_t>(grid.n_bins)] += counts[i];
  auto [rpovm, rxfd] = drop_empty_bins(povm, make_frequency_data(xcounts));
  const Eigen::VectorXd rxi = r_diagonal(rpovm);

  const fs::path out(a.out_dir);
  json report{{"lambda_tolerance", kDefaultLambdaTolerance},
              {"resolution", subspace_report_to_json(resolution, true)},
              {"fit_weighted", subspace_report_to_json(fit_weighted, false)}};
  write_json_atomic(out / "subspace.json", report);
  atomic_write_file(out / "eigenvalues.csv", eigenvalues_csv(resolution, fit_weighted));
  atomic_write_file(out / "r_diagonal.csv", r_diagonal_csv(rxi));

  if (c.mode == RunMode::Tomography) {
    const RenormalizedProjectorSet rp = renormalize(rps, rfd, rho);
    atomic_write_file(out / "renorm_factors.csv", renorm_factors_csv(rp, grid));
  } else {
    // Diagonal case: factors sqrt(f_i / rho_ii) per registered coordinate bin.
    const Eigen::VectorXd p = born_probability(rho, rpovm);
    std::ostringstream os;
    os << "phase_index,bin_index,bin_center,theta,factor\n";
    for (std::size_t i = 0; i < rpovm.size(); ++i) {
      if (p[static_cast<Eigen::Index>(i)] <= 0.0)
        throw DataError("state assigns zero probability to an observed bin");
      os << -1 << ',' << rpovm.labels[i].bin_index << ','
         << format_double(grid.bin_center(rpovm.labels[i].bin_index)) << ",0,"
         << format_double(std::sqrt(rxfd.frequencies[i] / p[static_cast<Eigen::Index>(i)]))
         << "\n";
    }
    atomic_write_file(out / "renorm_factors.csv", os.str());
  }

  for (const char* f : {"subspace.json", "eigenvalues.csv", "r_diagonal.csv", "renorm_factors.csv"})
    std::cout << (out / f).string() << "\n";
  return 0;
}

int cmd_pipeline(const CommonArgs& a, bool out_given) {
  const ExperimentConfig c = resolve_config(a);
  const fs::path out = out_given ? fs::path(a.out_dir) : fs::path("run_" + utc_timestamp());
  fs::create_directories(out);

  const BinGrid grid = make_bin_grid(c.grid);
  std::vector<std::string> files;

  auto stage = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError(std::string(name) + ": " + e.what());
    }
  };

  HomodyneRun run;
  stage("simulate", [&] {
    run = run_simulation(c);
    atomic_write_file(out / "histogram.csv", histogram_csv(grid, run.data.counts, c.mode));
    write_json_atomic(out / "simulate_meta.json", meta_json(c, run));
    files.push_back("histogram.csv");
    files.push_back("simulate_meta.json");
  });

  ReconstructionArtifacts art;
  stage("reconstruct", [&] {
    art = reconstruct_from_counts(c, run.data.counts, a.pure, a.diagonal);
    write_json_atomic(out / "result.json",
                      reconstruction_to_json(art.result, art.retained_ps.size(),
                                             art.retained_fd.total));
    files.push_back("result.json");
  });

  stage("diagnose", [&] {
    CommonArgs d = a;
    d.out_dir = out.string();
    cmd_diagnose(d, (out / "histogram.csv").string(), (out / "result.json").string());
    for (const char* f : {"subspace.json", "eigenvalues.csv", "r_diagonal.csv", "renorm_factors.csv"})
      files.push_back(f);
  });

  const std::string config_text = to_json(c).dump(2) + "\n";
  atomic_write_file(out / "config.json", config_text);
  files.push_back("config.json");

  json manifest{{"schema", "qtomo-manifest-1"},
                {"created_utc", utc_timestamp()},
                {"seed", c.seed},
                {"mode", c.mode == RunMode::Tomography ? "tomography" : "random-phase"},
                {"config_sha256", sha256_hex(config_text)},
                {"files", json::array()}};
  for (const auto& f : files)
    manifest["files"].push_back(json{{"name", f}, {"sha256", sha256_file(out / f)}});
  write_json_atomic(out / "manifest.json", manifest);

  std::cout << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maximum-likelihood homodyne tomography"};
  app.require_subcommand(1);

  CommonArgs sim_args, rec_args, diag_args, pipe_args;
  std::string histogram_path, result_path;

  CLI::App* sim = app.add_subcommand("simulate", "generate a homodyne histogram");
  add_common(sim, sim_args, false);

  CLI::App* rec = app.add_subcommand("reconstruct", "maximum-likelihood fit of a histogram");
  add_common(rec, rec_args, true);
  rec->add_option("--histogram", histogram_path, "histogram CSV")->required();

  CLI::App* diag = app.add_subcommand("diagnose", "subspace and renormalization diagnostics");
  add_common(diag, diag_args, false);
  diag->add_option("--histogram", histogram_path, "histogram CSV")->required();
  diag->add_option("--result", result_path, "reconstruction result JSON")->required();

  CLI::App* pipe = app.add_subcommand("pipeline", "simulate + reconstruct + diagnose");
  add_common(pipe, pipe_args, true);
  bool pipe_out_given = false;

  try {
    app.parse(argc, argv);
    pipe_out_given = pipe->count("--out") > 0;
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (rec->parsed()) return cmd_reconstruct(rec_args, histogram_path);
    if (diag->parsed()) return cmd_diagnose(diag_args, histogram_path, result_path);
    if (pipe->parsed()) return cmd_pipeline(pipe_args, pipe_out_given);
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
