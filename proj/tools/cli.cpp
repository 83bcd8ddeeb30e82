// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "harness.hpp"
#include "mgba/bal_io.hpp"
#include "mgba/error.hpp"
#include "mgba/metrics.hpp"

namespace mgba::tools {
namespace {

const std::map<std::string, PreconditionerKind> kPreconditioners = {
    {"pbj", PreconditionerKind::point_block_jacobi},
    {"visibility", PreconditionerKind::visibility},
    {"multigrid", PreconditionerKind::multigrid},
};

const std::map<std::string, LossKind> kLosses = {
    {"trivial", LossKind::trivial},
    {"huber", LossKind::huber},
};

struct GeneratorFlags {
  SyntheticSpec spec = default_synthetic_spec();
  Index blocks = 2;
  std::vector<double> drift_direction;
};

void add_generator_options(CLI::App* app, GeneratorFlags& g, bool with_blocks) {
  SyntheticSpec& s = g.spec;
  if (with_blocks) app->add_option("--blocks", g.blocks, "City blocks per side")->check(CLI::PositiveNumber);
  app->add_option("--block-size", s.city.block_size, "Block side in metres")->check(CLI::PositiveNumber);
  app->add_option("--street-width", s.city.street_width, "Street width in metres")->check(CLI::PositiveNumber);
  app->add_option("--min-height", s.city.min_height, "Lowest building height")->check(CLI::PositiveNumber);
  app->add_option("--max-height", s.city.max_height, "Highest building height")->check(CLI::PositiveNumber);
  app->add_option("--spacing", s.cameras.spacing, "Camera spacing along streets")->check(CLI::PositiveNumber);
  app->add_option("--camera-height", s.cameras.height, "Camera height above ground");
  app->add_option("--jitter", s.cameras.jitter, "Camera position jitter")->check(CLI::NonNegativeNumber);
  app->add_option("--focal", s.cameras.focal, "Focal length in pixels")->check(CLI::PositiveNumber);
  app->add_option("--k1", s.cameras.k1, "First radial distortion coefficient");
  app->add_option("--k2", s.cameras.k2, "Second radial distortion coefficient");
  app->add_option("--points", s.n_points, "Total points (0: points-per-block times blocks)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--points-per-block", s.points_per_block, "Points per city block")->check(CLI::PositiveNumber);
  app->add_option("--fov", s.visibility.fov_degrees, "Full view-cone angle in degrees")
      ->check(CLI::Range(1.0, 179.0));
  app->add_option("--range", s.visibility.max_range, "Maximum viewing distance")->check(CLI::PositiveNumber);
  app->add_option("--drift-rate", s.noise.drift_rate, "Drift per metre from the origin")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--drift-direction", g.drift_direction, "Drift direction x,y,z")->delimiter(',')->expected(3);
  app->add_option("--sin-amplitude", s.noise.sin_amplitude, "Sinusoidal noise amplitude")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--sin-wavelength", s.noise.sin_wavelength, "Sinusoidal noise wavelength (0: city extent)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--rotation-sigma", s.noise.rotation_sigma, "Rotation noise in radians")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--pixel-sigma", s.noise.pixel_sigma, "Pixel noise")->check(CLI::NonNegativeNumber);
}

void finish_generator(GeneratorFlags& g) {
  if (!g.drift_direction.empty()) {
    const Eigen::Vector3d d(g.drift_direction[0], g.drift_direction[1], g.drift_direction[2]);
    if (!(d.norm() > 0.0)) throw CLI::ValidationError("--drift-direction", "must be nonzero");
    g.spec.noise.drift_direction = d.normalized();
  }
  g.spec.city.n_blocks_x = g.blocks;
  g.spec.city.n_blocks_y = g.blocks;
}

void add_solve_options(CLI::App* app, SolveSettings& s) {
  app->add_option("--max-iterations", s.lm.max_iterations, "Nonlinear iteration cap")->check(CLI::PositiveNumber);
  app->add_option("--initial-radius", s.lm.initial_radius, "Initial trust region radius")
      ->check(CLI::PositiveNumber);
  app->add_option("--max-cg", s.linear.cg.max_iterations, "CG iteration cap")->check(CLI::PositiveNumber);
  app->add_option("--cluster-size", s.linear.visibility_cluster_size, "Visibility cluster cap")
      ->check(CLI::Range(Index{2}, Index{100000}));
  app->add_option("--aggregate-size", s.linear.multigrid.max_aggregate_size, "Multigrid aggregate cap")
      ->check(CLI::Range(Index{2}, Index{100000}));
  app->add_option("--coarse-size", s.linear.multigrid.coarse_size, "Coarsest level size in scalars")
      ->check(CLI::PositiveNumber);
  app->add_option("--coarsening-ratio", s.linear.multigrid.max_coarsening_ratio, "Stagnation ratio")
      ->check(CLI::Range(0.0, 1.0));
}

std::string json_hierarchy(const std::vector<MgLevelStats>& stats) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& s : stats) {
    levels.push_back({{"n_blocks", s.n_blocks},
                      {"block_size", s.block_size},
                      {"scalar_dim", s.scalar_dim},
                      {"nnz_blocks", s.nnz_blocks},
                      {"mode", std::string(to_string(s.mode))},
                      {"mean_aggregate_size", s.mean_aggregate_size},
                      {"lambda_max", s.lambda_max}});
  }
  return nlohmann::json{{"levels", levels}}.dump(2);
}

int cmd_generate(GeneratorFlags& g, std::uint64_t seed, const std::string& output, std::string truth_path,
                 std::ostream& out, std::ostream& err) {
  finish_generator(g);
  const SyntheticDataset ds = make_dataset(with_seed(g.spec, seed));
  if (truth_path.empty()) truth_path = output + ".truth";
  write_bal(output, ds.noisy);
  write_bal(truth_path, ds.ground_truth);
  for (const auto& w : ds.warnings) err << "warning: " << w << '\n';
  out << "cameras " << ds.noisy.num_cameras() << "\npoints " << ds.noisy.num_points() << "\nobservations "
      << ds.noisy.num_observations() << "\nbuildings " << ds.city.buildings.size() << "\nwrote " << output
      << " and " << truth_path << '\n';
  return kExitOk;
}

int cmd_solve(const std::string& path, const std::string& precond, const std::string& loss, SolveSettings s,
              std::uint64_t seed, const std::string& jsonl, const std::string& csv, const std::string& stats_path,
              const std::string& matrix_path, std::ostream& out, std::ostream& err) {
  BundleProblem problem = read_bal(path);
  problem.loss = kLosses.at(loss);
  for (const auto& w : problem.structural_warnings()) err << "warning: " << w << '\n';
  s.preconditioner = kPreconditioners.at(precond);

  if (!stats_path.empty() || !matrix_path.empty()) {
    BundleProblem probe = problem;
    LinearSolverOptions linear = s.linear;
    linear.preconditioner = s.preconditioner;
    linear.cg.tau = s.tau;
    BundleModel model(probe, linear);
    model.linearize();
    if (!matrix_path.empty()) {
      const Evaluation eval = evaluate(probe);
      SchurSystem sys = build_system(eval, Damping::from_evaluation(eval, s.lm.initial_radius),
                                     std::make_shared<SchurPattern>(model.pattern()));
      ensure_explicit(sys);
      std::ofstream f(matrix_path);
      sys.S_explicit->write_matrix_market(f);
    }
    if (!stats_path.empty()) {
      model.solve_step(s.lm.initial_radius, nullptr);
      std::ofstream f(stats_path);
      f << json_hierarchy(model.last_hierarchy()) << '\n';
    }
  }

  const std::string name = std::filesystem::path(path).stem().string();
  const RunMetrics run = solve_and_record(problem, name, s, seed);
  if (!jsonl.empty()) {
    std::ofstream f(jsonl);
    write_jsonl(f, run);
  }
  if (!csv.empty()) {
    std::ofstream f(csv);
    write_csv(f, {run});
  }
  const RunSummary sum = summarize(run);
  out << "preconditioner " << run.header.preconditioner << "\ninitial_objective " << run.records.front().objective
      << "\nfinal_objective " << run.final_objective << "\nnonlinear_iterations " << sum.nonlinear_iterations
      << "\ncg_iterations " << sum.total_cg_iterations << "\ntermination " << run.termination << '\n';
  if (run.termination == to_string(Termination::failure)) {
    err << "solver failure: " << run.message << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_bench(BenchSpec spec, GeneratorFlags& g, const std::vector<std::string>& preconds,
              const std::vector<std::string>& losses, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
  finish_generator(g);
  spec.synthetic = g.spec;
  spec.preconditioners.clear();
  for (const auto& p : preconds) spec.preconditioners.push_back(kPreconditioners.at(p));
  spec.losses.clear();
  for (const auto& l : losses) spec.losses.push_back(kLosses.at(l));
  const BenchResult result = run_bench(spec, out_dir, &out);
  for (const auto& n : result.notes) err << "note: " << n << '\n';
  write_summary_csv(out, result.summary);
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& inputs, const std::string& output, std::ostream& out) {
  std::vector<RunMetrics> runs;
  for (const auto& path : inputs) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open '" + path + "'");
    runs.push_back(read_jsonl(f));
  }
  const std::vector<RunMetrics> aligned = truncate_to_common_objective(runs);
  std::vector<RunSummary> rows;
  for (const auto& r : aligned) rows.push_back(summarize(r));
  write_summary_csv(out, rows);
  if (!output.empty()) {
    std::ofstream f(output);
    write_summary_csv(f, rows);
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bundle adjustment with a multigrid-preconditioned Schur solver"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Seed for every randomized step");

  auto* gen = app.add_subcommand("generate", "Write a synthetic grid-city problem in BAL format");
  GeneratorFlags gen_flags;
  std::string gen_output;
  std::string gen_truth;
  add_generator_options(gen, gen_flags, true);
  gen->add_option("-o,--output", gen_output, "Problem file")->required();
  gen->add_option("--ground-truth", gen_truth, "Ground-truth file (default: <output>.truth)");

  auto* solve = app.add_subcommand("solve", "Run Levenberg-Marquardt on a BAL problem");
  std::string solve_input;
  std::string solve_precond = "multigrid";
  std::string solve_loss = "huber";
  std::string solve_jsonl;
  std::string solve_csv;
  std::string solve_stats;
  std::string solve_matrix;
  SolveSettings solve_settings;
  solve->add_option("problem", solve_input, "BAL problem file")->required()->check(CLI::ExistingFile);
  solve->add_option("-p,--preconditioner", solve_precond, "pbj, visibility or multigrid")
      ->check(CLI::IsMember({"pbj", "visibility", "multigrid"}));
  solve->add_option("--tau", solve_settings.tau, "Forcing tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--loss", solve_loss, "trivial or huber")->check(CLI::IsMember({"trivial", "huber"}));
  solve->add_option("--jsonl", solve_jsonl, "Line-record metrics output");
  solve->add_option("--csv", solve_csv, "Comma-separated metrics output");
  solve->add_option("--hierarchy-stats", solve_stats, "Write multigrid hierarchy statistics (JSON)");
  solve->add_option("--export-schur", solve_matrix, "Write the initial Schur matrix (Matrix Market)");
  add_solve_options(solve, solve_settings);

  auto* bench = app.add_subcommand("bench", "Sweep grid sizes and preconditioners");
  BenchSpec bench_spec;
  GeneratorFlags bench_gen;
  std::vector<std::string> bench_preconds{"pbj", "multigrid"};
  std::vector<std::string> bench_losses{"huber"};
  std::string bench_out = "bench-out";
  bench->add_option("--sizes", bench_spec.grid_sizes, "Blocks per side, e.g. 2,3,4")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench->add_option("--preconditioners", bench_preconds, "Preconditioners to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"pbj", "visibility", "multigrid"}));
  bench->add_option("--tau", bench_spec.taus, "Forcing tolerances")->delimiter(',')->check(CLI::PositiveNumber);
  bench->add_option("--loss", bench_losses, "Losses")->delimiter(',')->check(CLI::IsMember({"trivial", "huber"}));
  bench->add_option("--repetitions", bench_spec.repetitions, "Problems per size")->check(CLI::PositiveNumber);
  bench->add_option("-o,--output", bench_out, "Metrics directory");
  add_generator_options(bench, bench_gen, false);
  add_solve_options(bench, bench_spec.solve);

  auto* compare = app.add_subcommand("compare", "Align runs of one problem at a common objective");
  std::vector<std::string> compare_inputs;
  std::string compare_output;
  compare->add_option("metrics", compare_inputs, "Line-record metrics files")->required()->check(CLI::ExistingFile);
  compare->add_option("-o,--output", compare_output, "Summary table output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(gen_flags, seed, gen_output, gen_truth, out, err);
    if (*solve) {
      return cmd_solve(solve_input, solve_precond, solve_loss, solve_settings, seed, solve_jsonl, solve_csv,
                       solve_stats, solve_matrix, out, err);
    }
    if (*bench) {
      bench_spec.seed = seed;
      return cmd_bench(bench_spec, bench_gen, bench_preconds, bench_losses, bench_out, out, err);
    }
    if (*compare) return cmd_compare(compare_inputs, compare_output, out);
  } catch (const CLI::ValidationError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mgba::tools
