// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/bal_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "mgba/error.hpp"

namespace mgba {
namespace {

std::string format_scalar(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

class Tokenizer {
 public:
  explicit Tokenizer(std::istream& in) : in_(in) {}

  /// Next whitespace-separated token; throws naming `section` at end of input.
  std::string_view next(const std::string& section) {
    for (;;) {
      while (pos_ < line_.size() && (line_[pos_] == ' ' || line_[pos_] == '\t' || line_[pos_] == '\r')) ++pos_;
      if (pos_ < line_.size()) break;
      if (!std::getline(in_, line_)) {
        throw ParseError("unexpected end of file while reading " + section, line_number_);
      }
      ++line_number_;
      pos_ = 0;
    }
    const std::size_t start = pos_;
    while (pos_ < line_.size() && line_[pos_] != ' ' && line_[pos_] != '\t' && line_[pos_] != '\r') ++pos_;
    return std::string_view(line_).substr(start, pos_ - start);
  }

  double next_double(const std::string& section) {
    const std::string_view tok = next(section);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("malformed number '" + std::string(tok) + "' in " + section, line_number_);
    }
    return v;
  }

  Index next_index(const std::string& section) {
    const std::string_view tok = next(section);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
      throw ParseError("malformed index '" + std::string(tok) + "' in " + section, line_number_);
    }
    return static_cast<Index>(v);
  }

  std::size_t line_number() const { return line_number_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t pos_ = 0;
  std::size_t line_number_ = 0;
};

}  // namespace

void write_bal(std::ostream& out, const BundleProblem& problem) {
  out << problem.num_cameras() << ' ' << problem.num_points() << ' ' << problem.num_observations() << '\n';
  for (const auto& o : problem.observations) {
    out << o.camera << ' ' << o.point << ' ' << format_scalar(o.measured.x()) << ' '
        << format_scalar(o.measured.y()) << '\n';
  }
  for (const auto& c : problem.cameras) {
    const auto p = c.params();
    for (int k = 0; k < kCameraSize; ++k) out << format_scalar(p(k)) << '\n';
  }
  for (const auto& p : problem.points) {
    for (int k = 0; k < kPointSize; ++k) out << format_scalar(p.position(k)) << '\n';
  }
}

void write_bal(const std::string& path, const BundleProblem& problem) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_bal(out, problem);
  if (!out) throw Error("failed writing '" + path + "'");
}

BundleProblem read_bal(std::istream& in) {
  Tokenizer tok(in);
  const Index n_cameras = tok.next_index("header");
  const Index n_points = tok.next_index("header");
  const Index n_obs = tok.next_index("header");
  BundleProblem problem;
  problem.observations.resize(static_cast<std::size_t>(n_obs));
  for (Index k = 0; k < n_obs; ++k) {
    auto& o = problem.observations[static_cast<std::size_t>(k)];
    o.camera = tok.next_index("observations");
    o.point = tok.next_index("observations");
    if (o.camera >= n_cameras || o.point >= n_points) {
      throw ParseError("observation index out of range", tok.line_number());
    }
    o.measured.x() = tok.next_double("observations");
    o.measured.y() = tok.next_double("observations");
  }
  problem.cameras.resize(static_cast<std::size_t>(n_cameras));
  for (Index i = 0; i < n_cameras; ++i) {
    Eigen::Matrix<double, kCameraSize, 1> p;
    for (int k = 0; k < kCameraSize; ++k) p(k) = tok.next_double("camera parameters");
    problem.cameras[static_cast<std::size_t>(i)] = Camera::from_params(p);
  }
  problem.points.resize(static_cast<std::size_t>(n_points));
  for (Index j = 0; j < n_points; ++j) {
    for (int k = 0; k < kPointSize; ++k) {
      problem.points[static_cast<std::size_t>(j)].position(k) = tok.next_double("point parameters");
    }
  }
  return problem;
}

BundleProblem read_bal(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_bal(in);
}

}  // namespace mgba
