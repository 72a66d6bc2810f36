#pragma once

// Command-line entry point, callable in-process.

namespace subcm::cli {

/// Exit codes: 0 success, 1 failed comparison or check or a solver error, 2 invalid input.
int cli_main(int argc, const char* const* argv);

}  // namespace subcm::cli
