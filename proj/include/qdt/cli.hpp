#pragma once

namespace qdt::cli {

// Command-line entry point (subcommands: simulate, fit, benchmark, fidelity).
// Returns the process exit code: 0 success, 1 config error, 2 numeric failure.
int run(int argc, const char* const* argv);

}  // namespace qdt::cli
