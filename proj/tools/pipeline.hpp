#pragma once

namespace fort_cli {

// Full command-line entry point: parses the subcommand, merges the JSON
// config with flag overrides (flags win), validates, runs, writes outputs.
// Exit codes: 0 success, 2 invalid configuration or data, 3 numerical
// failure during estimation.
int run(int argc, char** argv);

}  // namespace fort_cli
