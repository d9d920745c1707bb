#pragma once

#include <string>
#include <vector>

namespace cloth {

/// Entry point behind main(). Subcommands: simulate, train, rollout, eval,
/// bench, export. Returns the process exit code; errors are printed to
/// stderr and map to exit code 1, CLI parse errors to 2.
int run_cli(const std::vector<std::string>& args);

}  // namespace cloth
