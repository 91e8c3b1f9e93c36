#pragma once

namespace fieldswarm {

/// Exit codes of the command-line interface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeFailure = 2;

/// Environment variable holding the default bus address ("host:port").
inline constexpr const char* kBusAddressEnv = "FIELDSWARM_BUS_ADDR";

/// Full command line: run, metrics, validate, child.
int run_cli(int argc, char** argv);

}  // namespace fieldswarm
