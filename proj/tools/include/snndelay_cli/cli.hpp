#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace snndelay::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Dispatches `args` (without the program name) to a subcommand:
/// train, eval, sweep, gradcheck, params, convert, gen-synth.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace snndelay::cli
