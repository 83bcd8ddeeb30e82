// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_TOOLS_CLI_HPP
#define MGBA_TOOLS_CLI_HPP

#include <iosfwd>

namespace mgba::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `mgba` tool: generate, solve, bench and compare.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mgba::tools

#endif  // MGBA_TOOLS_CLI_HPP
