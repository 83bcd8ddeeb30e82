// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_BAL_IO_HPP
#define MGBA_BAL_IO_HPP

#include <iosfwd>
#include <string>

#include "mgba/problem.hpp"

namespace mgba {

// Bundle Adjustment in the Large text format: a header line
// "<n_cameras> <n_points> <n_observations>", one "<camera> <point> <x> <y>"
// line per observation, then 9 scalars per camera and 3 per point, one per
// line. Scalars are written with 17 significant digits so that a read of a
// written file reproduces the problem exactly.
void write_bal(std::ostream& out, const BundleProblem& problem);
void write_bal(const std::string& path, const BundleProblem& problem);

/// Throws ParseError with the offending line for truncated input, malformed
/// numbers and out-of-range indices. The loss is left trivial.
BundleProblem read_bal(std::istream& in);
BundleProblem read_bal(const std::string& path);

}  // namespace mgba

#endif  // MGBA_BAL_IO_HPP
