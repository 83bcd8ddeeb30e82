// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "mgba/error.hpp"

namespace mgba::tools {

SyntheticSpec default_synthetic_spec() {
  SyntheticSpec spec;
  spec.loss = LossKind::huber;
  return spec;
}

SyntheticSpec with_seed(SyntheticSpec spec, std::uint64_t seed) {
  spec.city.seed = seed;
  spec.cameras.seed = seed + 1;
  spec.point_seed = seed + 2;
  spec.noise.seed = seed + 3;
  return spec;
}

RunMetrics solve_and_record(const BundleProblem& problem, const std::string& name, const SolveSettings& settings,
                            std::uint64_t seed, BundleProblem* solved) {
  BundleProblem work = problem;
  LinearSolverOptions linear = settings.linear;
  linear.preconditioner = settings.preconditioner;
  linear.cg.tau = settings.tau;

  RunHeader header;
  header.problem = name;
  header.n_cameras = problem.num_cameras();
  header.n_points = problem.num_points();
  header.n_observations = problem.num_observations();
  header.preconditioner = std::string(to_string(settings.preconditioner));
  header.tau = settings.tau;
  header.loss = std::string(to_string(problem.loss));
  header.seed = seed;

  const auto start = std::chrono::steady_clock::now();
  NonlinearReport report = solve_bundle(work, linear, settings.lm);
  header.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (solved != nullptr) *solved = std::move(work);
  return make_run_metrics(header, report);
}

BenchResult run_bench(const BenchSpec& spec, const std::string& out_dir, std::ostream* log) {
  if (spec.grid_sizes.empty() || spec.preconditioners.empty() || spec.taus.empty() || spec.losses.empty() ||
      spec.repetitions < 1) {
    throw ContractError("run_bench: every sweep list must be nonempty");
  }
  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  BenchResult result;
  for (Index n : spec.grid_sizes) {
    for (LossKind loss : spec.losses) {
      for (Index rep = 0; rep < spec.repetitions; ++rep) {
        const std::uint64_t seed = spec.seed + 1000 * static_cast<std::uint64_t>(rep);
        SyntheticSpec synth = with_seed(spec.synthetic, seed);
        synth.city.n_blocks_x = n;
        synth.city.n_blocks_y = n;
        synth.loss = loss;
        const SyntheticDataset ds = make_dataset(synth);
        BundleProblem problem = ds.noisy;
        problem.loss = loss;
        const std::string name = "city" + std::to_string(n) + "x" + std::to_string(n) + "-" +
                                 std::string(to_string(loss)) + "-r" + std::to_string(rep);
        if (log != nullptr) {
          *log << name << ": " << problem.num_cameras() << " cameras, " << problem.num_points() << " points, "
               << problem.num_observations() << " observations\n";
        }
        for (double tau : spec.taus) {
          std::vector<RunMetrics> group;
          for (PreconditionerKind kind : spec.preconditioners) {
            SolveSettings settings = spec.solve;
            settings.preconditioner = kind;
            settings.tau = tau;
            RunMetrics run = solve_and_record(problem, name, settings, seed);
            if (log != nullptr) {
              const RunSummary s = summarize(run);
              *log << "  " << run.header.preconditioner << " tau=" << tau << ": " << s.nonlinear_iterations
                   << " LM iterations, " << s.total_cg_iterations << " CG iterations, objective "
                   << run.final_objective << " (" << run.termination << ")\n";
            }
            if (!out_dir.empty()) {
              std::ofstream f(fs::path(out_dir) / (name + "-" + run.header.preconditioner + "-tau" +
                                                   std::to_string(tau) + ".jsonl"));
              write_jsonl(f, run);
            }
            group.push_back(std::move(run));
          }
          std::vector<RunMetrics> aligned = group;
          if (group.size() >= 2) {
            try {
              aligned = truncate_to_common_objective(group);
            } catch (const IncomparableRunsError& e) {
              result.notes.push_back(name + ": " + e.what());
            }
          }
          for (const auto& run : aligned) result.summary.push_back(summarize(run));
          for (auto& run : group) result.runs.push_back(std::move(run));
        }
      }
    }
  }
  if (!out_dir.empty()) {
    std::ofstream runs(fs::path(out_dir) / "runs.csv");
    write_csv(runs, result.runs);
    std::ofstream summary(fs::path(out_dir) / "summary.csv");
    write_summary_csv(summary, result.summary);
  }
  return result;
}

}  // namespace mgba::tools
