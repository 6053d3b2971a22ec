#pragma once

#include <string>
#include <vector>

namespace rapidkrig::bench {

/// Command-line entry point: predict, simulate, bench-error, bench-converge, bench-time.
/// Returns 0 on success, 1 on invalid input or usage, 2 on numeric failure.
int cli_main(int argc, char** argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace rapidkrig::bench
