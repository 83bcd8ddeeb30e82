// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_ERROR_HPP
#define MGBA_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgba {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand sizes do not chain.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
      : Error(what + ": expected size " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// A diagonal block failed Cholesky factorization.
class IndefiniteBlockError : public Error {
 public:
  IndefiniteBlockError(const std::string& what, std::size_t block_index)
      : Error(what + ": block " + std::to_string(block_index) +
              " is not positive definite"),
        block_index_(block_index) {}

  std::size_t block_index() const { return block_index_; }

 private:
  std::size_t block_index_;
};

/// One or more observations project from behind (or onto) the camera plane.
class BehindCameraError : public Error {
 public:
  explicit BehindCameraError(std::vector<std::size_t> observations)
      : Error(describe(observations)), observations_(std::move(observations)) {}

  const std::vector<std::size_t>& observations() const { return observations_; }

 private:
  static std::string describe(const std::vector<std::size_t>& obs) {
    std::string msg = std::to_string(obs.size()) + " observation(s) behind camera:";
    for (std::size_t i = 0; i < obs.size() && i < 8; ++i) msg += " " + std::to_string(obs[i]);
    if (obs.size() > 8) msg += " ...";
    return msg;
  }

  std::vector<std::size_t> observations_;
};

/// Precondition on an argument did not hold.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// CG breakdown: the preconditioner produced <r, M r> <= 0.
class NotPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity appeared during an iterative solve.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Benchmark runs share no objective value and cannot be aligned.
class IncomparableRunsError : public Error {
 public:
  using Error::Error;
};

}  // namespace mgba

#endif  // MGBA_ERROR_HPP
