#pragma once

#include <iosfwd>

namespace malbehave {

/// Entry point of the `malbehave` command. Subcommands: synth, extract,
/// train, predict, evaluate, flip-eval. Returns the process exit status;
/// failures print one `malbehave <stage>: <reason>` line to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace malbehave
