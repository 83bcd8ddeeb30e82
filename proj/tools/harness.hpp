// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_TOOLS_HARNESS_HPP
#define MGBA_TOOLS_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mgba/metrics.hpp"
#include "mgba/precond.hpp"
#include "mgba/problem.hpp"
#include "mgba/solver.hpp"
#include "mgba/synth.hpp"

namespace mgba::tools {

/// Generator settings used by the benchmark sweep and as CLI defaults.
SyntheticSpec default_synthetic_spec();

/// Derives the city, camera, point and noise seeds from one seed.
SyntheticSpec with_seed(SyntheticSpec spec, std::uint64_t seed);

struct SolveSettings {
  PreconditionerKind preconditioner = PreconditionerKind::multigrid;
  double tau = 1e-2;
  LinearSolverOptions linear;
  LmOptions lm;
};

/// Solves a copy of the problem and packages the report as metrics.
RunMetrics solve_and_record(const BundleProblem& problem, const std::string& name, const SolveSettings& settings,
                            std::uint64_t seed, BundleProblem* solved = nullptr);

struct BenchSpec {
  std::vector<Index> grid_sizes{2, 3};
  std::vector<PreconditionerKind> preconditioners{PreconditionerKind::point_block_jacobi,
                                                  PreconditionerKind::multigrid};
  std::vector<double> taus{1e-2};
  std::vector<LossKind> losses{LossKind::huber};
  Index repetitions = 1;
  std::uint64_t seed = 1;
  SyntheticSpec synthetic = default_synthetic_spec();
  SolveSettings solve;
};

struct BenchResult {
  std::vector<RunMetrics> runs;
  /// One row per run, computed on runs truncated to their group's common
  /// objective (untruncated when a group is incomparable).
  std::vector<RunSummary> summary;
  std::vector<std::string> notes;
};

// Cross product of sizes, losses, repetitions, taus and preconditioners on
// n x n grid cities. Writes one JSONL file per run, runs.csv and summary.csv
// into out_dir unless it is empty. Failed runs are recorded and the sweep
// continues.
BenchResult run_bench(const BenchSpec& spec, const std::string& out_dir, std::ostream* log = nullptr);

}  // namespace mgba::tools

#endif  // MGBA_TOOLS_HARNESS_HPP
