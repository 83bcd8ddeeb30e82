// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mgba/error.hpp"

namespace mgba {
namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("malformed number '" + s + "'", line_no);
  return v;
}

long long parse_int(const std::string& s, std::size_t line_no) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("malformed integer '" + s + "'", line_no);
  return v;
}

std::uint64_t parse_uint(const std::string& s, std::size_t line_no) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("malformed integer '" + s + "'", line_no);
  return v;
}

json header_json(const RunHeader& h) {
  return json{{"type", "header"},
              {"problem", h.problem},
              {"n_cameras", h.n_cameras},
              {"n_points", h.n_points},
              {"n_observations", h.n_observations},
              {"preconditioner", h.preconditioner},
              {"tau", h.tau},
              {"loss", h.loss},
              {"seed", h.seed},
              {"wall_seconds", h.wall_seconds}};
}

json record_json(const IterationRecord& r) {
  return json{{"type", "iteration"},
              {"iteration", r.iteration},
              {"objective", r.objective},
              {"cg_iterations", r.cg_iterations},
              {"step_norm", r.step_norm},
              {"trust_radius", r.trust_radius},
              {"accepted", r.accepted},
              {"linear_setup_seconds", r.linear_setup_seconds},
              {"linear_solve_seconds", r.linear_solve_seconds}};
}

bool same_records_except_timing(const IterationRecord& a, const IterationRecord& b) {
  return a.iteration == b.iteration && a.objective == b.objective && a.cg_iterations == b.cg_iterations &&
         a.step_norm == b.step_norm && a.trust_radius == b.trust_radius && a.accepted == b.accepted;
}

}  // namespace

const std::vector<std::string> kCsvColumns = {
    "problem",   "n_cameras",     "n_points",   "n_observations", "preconditioner",
    "tau",       "loss",          "seed",       "wall_seconds",   "termination",
    "message",   "final_objective", "iteration", "objective",     "cg_iterations",
    "step_norm", "trust_radius",  "accepted",   "linear_setup_seconds", "linear_solve_seconds"};

RunMetrics make_run_metrics(const RunHeader& header, const NonlinearReport& report) {
  RunMetrics run;
  run.header = header;
  run.records = report.iterations;
  run.termination = std::string(to_string(report.termination));
  run.message = report.message;
  run.final_objective = report.final_objective;
  return run;
}

void write_jsonl(std::ostream& out, const RunMetrics& run) {
  out << header_json(run.header).dump() << '\n';
  for (const auto& r : run.records) out << record_json(r).dump() << '\n';
  const json trailer{{"type", "trailer"},
                     {"termination", run.termination},
                     {"message", run.message},
                     {"final_objective", run.final_objective}};
  out << trailer.dump() << '\n';
}

RunMetrics read_jsonl(std::istream& in) {
  RunMetrics run;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool have_trailer = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        RunHeader& h = run.header;
        h.problem = j.at("problem").get<std::string>();
        h.n_cameras = j.at("n_cameras").get<Index>();
        h.n_points = j.at("n_points").get<Index>();
        h.n_observations = j.at("n_observations").get<Index>();
        h.preconditioner = j.at("preconditioner").get<std::string>();
        h.tau = j.at("tau").get<double>();
        h.loss = j.at("loss").get<std::string>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.wall_seconds = j.at("wall_seconds").get<double>();
        have_header = true;
      } else if (type == "iteration") {
        IterationRecord r;
        r.iteration = j.at("iteration").get<Index>();
        r.objective = j.at("objective").get<double>();
        r.cg_iterations = j.at("cg_iterations").get<Index>();
        r.step_norm = j.at("step_norm").get<double>();
        r.trust_radius = j.at("trust_radius").get<double>();
        r.accepted = j.at("accepted").get<bool>();
        r.linear_setup_seconds = j.at("linear_setup_seconds").get<double>();
        r.linear_solve_seconds = j.at("linear_solve_seconds").get<double>();
        run.records.push_back(r);
      } else if (type == "trailer") {
        run.termination = j.at("termination").get<std::string>();
        run.message = j.at("message").get<std::string>();
        run.final_objective = j.at("final_objective").get<double>();
        have_trailer = true;
      } else {
        throw ParseError("unknown record type '" + type + "'", line_no);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad metrics record: ") + e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("metrics file has no header record", line_no);
  if (!have_trailer) throw ParseError("metrics file has no trailer record", line_no);
  return run;
}

void write_csv(std::ostream& out, const std::vector<RunMetrics>& runs) {
  for (std::size_t c = 0; c < kCsvColumns.size(); ++c) out << (c ? "," : "") << kCsvColumns[c];
  out << '\n';
  for (const auto& run : runs) {
    const RunHeader& h = run.header;
    const std::string prefix = csv_field(h.problem) + ',' + std::to_string(h.n_cameras) + ',' +
                               std::to_string(h.n_points) + ',' + std::to_string(h.n_observations) + ',' +
                               csv_field(h.preconditioner) + ',' + fmt(h.tau) + ',' + csv_field(h.loss) + ',' +
                               std::to_string(h.seed) + ',' + fmt(h.wall_seconds) + ',' +
                               csv_field(run.termination) + ',' + csv_field(run.message) + ',' +
                               fmt(run.final_objective);
    for (const auto& r : run.records) {
      out << prefix << ',' << r.iteration << ',' << fmt(r.objective) << ',' << r.cg_iterations << ','
          << fmt(r.step_norm) << ',' << fmt(r.trust_radius) << ',' << (r.accepted ? 1 : 0) << ','
          << fmt(r.linear_setup_seconds) << ',' << fmt(r.linear_solve_seconds) << '\n';
    }
  }
}

std::vector<RunMetrics> read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty metrics table", line_no);
  if (split_csv(line, line_no) != kCsvColumns) throw ParseError("unexpected metrics columns", line_no);
  std::vector<RunMetrics> runs;
  std::string last_key;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line, line_no);
    if (f.size() != kCsvColumns.size()) throw ParseError("wrong number of fields", line_no);
    // A run is a maximal block of rows sharing the run columns.
    std::string key;
    for (std::size_t c = 0; c < 12; ++c) key += f[c] + '\x1f';
    IterationRecord r;
    r.iteration = static_cast<Index>(parse_int(f[12], line_no));
    if (runs.empty() || key != last_key || r.iteration <= runs.back().records.back().iteration) {
      RunMetrics run;
      run.header.problem = f[0];
      run.header.n_cameras = static_cast<Index>(parse_int(f[1], line_no));
      run.header.n_points = static_cast<Index>(parse_int(f[2], line_no));
      run.header.n_observations = static_cast<Index>(parse_int(f[3], line_no));
      run.header.preconditioner = f[4];
      run.header.tau = parse_double(f[5], line_no);
      run.header.loss = f[6];
      run.header.seed = parse_uint(f[7], line_no);
      run.header.wall_seconds = parse_double(f[8], line_no);
      run.termination = f[9];
      run.message = f[10];
      run.final_objective = parse_double(f[11], line_no);
      runs.push_back(std::move(run));
      last_key = key;
    }
    r.objective = parse_double(f[13], line_no);
    r.cg_iterations = static_cast<Index>(parse_int(f[14], line_no));
    r.step_norm = parse_double(f[15], line_no);
    r.trust_radius = parse_double(f[16], line_no);
    r.accepted = parse_int(f[17], line_no) != 0;
    r.linear_setup_seconds = parse_double(f[18], line_no);
    r.linear_solve_seconds = parse_double(f[19], line_no);
    runs.back().records.push_back(r);
  }
  return runs;
}

bool same_except_timing(const RunMetrics& a, const RunMetrics& b) {
  const RunHeader& x = a.header;
  const RunHeader& y = b.header;
  if (x.problem != y.problem || x.n_cameras != y.n_cameras || x.n_points != y.n_points ||
      x.n_observations != y.n_observations || x.preconditioner != y.preconditioner || x.tau != y.tau ||
      x.loss != y.loss || x.seed != y.seed) {
    return false;
  }
  if (a.termination != b.termination || a.message != b.message || a.final_objective != b.final_objective) {
    return false;
  }
  return std::equal(a.records.begin(), a.records.end(), b.records.begin(), b.records.end(),
                    same_records_except_timing);
}

std::vector<RunMetrics> truncate_to_common_objective(const std::vector<RunMetrics>& runs) {
  if (runs.size() < 2) throw ContractError("truncate_to_common_objective: need at least two runs");
  double common = -std::numeric_limits<double>::infinity();
  double lowest_top = std::numeric_limits<double>::infinity();
  for (const auto& run : runs) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& r : run.records) {
      if (!r.accepted) continue;
      lo = std::min(lo, r.objective);
      hi = std::max(hi, r.objective);
    }
    if (!std::isfinite(lo)) throw IncomparableRunsError("run '" + run.header.preconditioner + "' has no accepted iterations");
    common = std::max(common, lo);
    lowest_top = std::min(lowest_top, hi);
  }
  if (common > lowest_top) {
    throw IncomparableRunsError("runs share no objective value (common " + fmt(common) + " above lowest start " +
                                fmt(lowest_top) + ")");
  }
  std::vector<RunMetrics> out;
  out.reserve(runs.size());
  for (const auto& run : runs) {
    RunMetrics cut = run;
    cut.records.clear();
    for (const auto& r : run.records) {
      cut.records.push_back(r);
      if (r.accepted && r.objective <= common) break;
    }
    cut.final_objective = cut.records.back().objective;
    out.push_back(std::move(cut));
  }
  return out;
}

RunSummary summarize(const RunMetrics& run) {
  RunSummary s;
  s.problem = run.header.problem;
  s.preconditioner = run.header.preconditioner;
  s.n_cameras = run.header.n_cameras;
  for (const auto& r : run.records) {
    if (r.iteration == 0) continue;
    ++s.nonlinear_iterations;
    s.total_cg_iterations += r.cg_iterations;
    s.linear_seconds += r.linear_setup_seconds + r.linear_solve_seconds;
  }
  s.cg_per_iteration = s.nonlinear_iterations > 0 ? static_cast<double>(s.total_cg_iterations) /
                                                        static_cast<double>(s.nonlinear_iterations)
                                                  : 0.0;
  s.seconds_per_camera = s.n_cameras > 0 ? s.linear_seconds / static_cast<double>(s.n_cameras) : 0.0;
  s.final_objective = run.records.empty() ? run.final_objective : run.records.back().objective;
  return s;
}

void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& rows) {
  out << "problem,preconditioner,n_cameras,nonlinear_iterations,total_cg_iterations,cg_per_iteration,"
         "linear_seconds,seconds_per_camera,final_objective\n";
  for (const auto& s : rows) {
    out << csv_field(s.problem) << ',' << csv_field(s.preconditioner) << ',' << s.n_cameras << ','
        << s.nonlinear_iterations << ',' << s.total_cg_iterations << ',' << fmt(s.cg_per_iteration) << ','
        << fmt(s.linear_seconds) << ',' << fmt(s.seconds_per_camera) << ',' << fmt(s.final_objective) << '\n';
  }
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("log_log_slope: need two or more paired samples");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ContractError("log_log_slope: samples must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ContractError("log_log_slope: x values are all equal");
  return sxy / sxx;
}

}  // namespace mgba
