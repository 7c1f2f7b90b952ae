#pragma once

#include <iosfwd>

namespace fcs {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Environment variable naming the default `train` config file.
inline constexpr const char* kConfigEnv = "FCS_CONFIG";

/// Entry point of the `fcs` tool. Returns the process exit code; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace fcs
