// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the `gob` tool: generate, train, evaluate, forecast,
// gradcheck and solvercmp.
#pragma once

#include <iosfwd>

namespace gob::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Parses argv and runs one subcommand; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gob::cli
