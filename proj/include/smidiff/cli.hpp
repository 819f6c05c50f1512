//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_CLI_HPP_
#define SMIDIFF_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace smidiff {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// args[0] is the program name. Subcommands: tokenize, lint, corrupt,
// make-synth, train, generate, evaluate, dump-schedule.
int run_cli(const std::vector<std::string> &args, std::istream &in,
            std::ostream &out, std::ostream &err);

}  // namespace smidiff

#endif  // SMIDIFF_CLI_HPP_
