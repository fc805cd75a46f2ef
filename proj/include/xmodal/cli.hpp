// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth-data, split, train, generate, evaluate,
// report.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xmodal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

/// args excludes the program name. Failures print one line
/// `error: <usage|data|divergence|internal>: <message>` to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xmodal::cli
