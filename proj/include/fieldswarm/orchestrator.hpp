#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldswarm/app_process.hpp"
#include "fieldswarm/bus.hpp"
#include "fieldswarm/config.hpp"

namespace fieldswarm {

class BusServer;
class Gateway;

class LaunchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ChildMode { Thread, Process };

struct RunOptions {
    std::filesystem::path output_dir = "runs";
    std::optional<std::string> run_id;  // default: <UTC timestamp>-s<seed>
    /// Spawn OS processes (over the TCP bus) instead of threads.
    ChildMode mode = ChildMode::Thread;
    /// Executable used for child processes; must understand the `child` subcommand.
    std::filesystem::path executable;
    /// Start a monitor tracking the min pairwise distance from this time on
    /// (simulated runs only).
    std::optional<std::int64_t> monitor_from_ms;
};

std::string make_run_id(std::int64_t seed);

/// Builds the AppProcess a config describes for one role ("environment",
/// "agent:<id>", "logger:<index>"). Shared by threads, child processes and the
/// simulated scheduler.
std::unique_ptr<AppProcess> make_process(const ExperimentConfig& config, const std::string& role, Bus& bus,
                                         const std::filesystem::path& run_dir);

/// Roles in launch order: environment, loggers, agents.
std::vector<std::string> process_roles(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Simulated clock

struct SimulationResult {
    std::string run_id;
    std::filesystem::path run_dir;
    std::map<std::string, std::uint64_t> ticks;  // per child name
    std::optional<double> monitored_min_distance;
};

/// Runs the whole experiment in lockstep on a simulated clock for
/// duration_ms, then lets every process finish and raises stop. The resolved
/// config (seeded initial positions included) is written to the run directory.
SimulationResult run_simulation(const ExperimentConfig& config, std::int64_t duration_ms, const RunOptions& options);

// ---------------------------------------------------------------------------
// Wall clock

struct ChildDescriptor {
    std::string name;
    std::string role;  // "environment", "agent:A", "logger:0", "gateway"
    ChildMode mode = ChildMode::Thread;
    int pid = -1;
};

struct ChildExit {
    std::string name;
    std::string status;  // "clean", "forced", "failed"
    std::uint64_t ticks = 0;
    std::string detail;
};

struct ExitReport {
    std::vector<ChildExit> children;
    bool already_shut_down = false;

    [[nodiscard]] bool all_clean() const;
};

/// Live run. Children are registered in start order: environment, loggers,
/// gateway, agents.
class RunHandle {
public:
    RunHandle();
    ~RunHandle();
    RunHandle(RunHandle&&) noexcept;
    RunHandle& operator=(RunHandle&&) noexcept;

    [[nodiscard]] const std::string& run_id() const;
    [[nodiscard]] const std::filesystem::path& run_dir() const;
    [[nodiscard]] std::chrono::system_clock::time_point start_time() const;
    [[nodiscard]] std::vector<ChildDescriptor> children() const;
    [[nodiscard]] std::shared_ptr<Bus> bus() const;
    [[nodiscard]] std::shared_ptr<RunClock> clock() const;
    /// TCP bus port, 0 when the run has no TCP listener.
    [[nodiscard]] std::uint16_t bus_port() const;
    /// Gateway port, 0 when no gateway is configured.
    [[nodiscard]] std::uint16_t gateway_port() const;

    struct State;
    std::unique_ptr<State> state;
};

/// Starts bus, environment (its first state is on the bus before anything
/// else runs), loggers, gateway and agents. On failure, tears down whatever
/// already started and throws LaunchError.
RunHandle launch(const ExperimentConfig& config, const RunOptions& options);

/// Raises stop, waits up to timeout for every child, forcibly ends
/// stragglers, and reports per-child status. A second call returns an empty
/// report flagged already_shut_down.
ExitReport shutdown(RunHandle& handle, std::chrono::milliseconds timeout);

/// Debug hook: register an extra thread child (tests use it to model a hung child).
void attach_thread_child(RunHandle& handle, std::shared_ptr<AppProcess> process);

/// Entry point of a child OS process.
int run_child_process(const std::filesystem::path& resolved_config, const std::string& role,
                      const std::string& bus_address, std::int64_t epoch_ms, const std::filesystem::path& run_dir);

}  // namespace fieldswarm
