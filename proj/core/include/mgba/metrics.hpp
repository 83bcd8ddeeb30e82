// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_METRICS_HPP
#define MGBA_METRICS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mgba/solver.hpp"

namespace mgba {

struct RunHeader {
  std::string problem;
  Index n_cameras = 0;
  Index n_points = 0;
  Index n_observations = 0;
  std::string preconditioner;
  double tau = 0.0;
  std::string loss;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

struct RunMetrics {
  RunHeader header;
  std::vector<IterationRecord> records;
  std::string termination;
  /// Failure reason, empty on success.
  std::string message;
  double final_objective = 0.0;
};

RunMetrics make_run_metrics(const RunHeader& header, const NonlinearReport& report);

// Line-record form: a header object, one object per iteration and a
// trailer, each tagged by "type".
void write_jsonl(std::ostream& out, const RunMetrics& run);
RunMetrics read_jsonl(std::istream& in);

/// Comma-separated form with one row per iteration; run columns repeat.
void write_csv(std::ostream& out, const std::vector<RunMetrics>& runs);
std::vector<RunMetrics> read_csv(std::istream& in);
extern const std::vector<std::string> kCsvColumns;

/// Equality of everything except the *_seconds fields.
bool same_except_timing(const RunMetrics& a, const RunMetrics& b);

// Aligns runs of one problem at the highest objective that every run's
// accepted iterations reach: each run is cut after its first accepted record
// at or below that value. Throws IncomparableRunsError when the accepted
// objective ranges do not overlap, ContractError for fewer than two runs.
std::vector<RunMetrics> truncate_to_common_objective(const std::vector<RunMetrics>& runs);

struct RunSummary {
  std::string problem;
  std::string preconditioner;
  Index n_cameras = 0;
  /// Records after the initial one.
  Index nonlinear_iterations = 0;
  Index total_cg_iterations = 0;
  double cg_per_iteration = 0.0;
  double linear_seconds = 0.0;
  double seconds_per_camera = 0.0;
  double final_objective = 0.0;
};

RunSummary summarize(const RunMetrics& run);

void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& rows);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mgba

#endif  // MGBA_METRICS_HPP
