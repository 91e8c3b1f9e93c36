#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldswarm/config.hpp"
#include "fieldswarm/loggers.hpp"

namespace fieldswarm {

class TrajectoryParseError : public std::runtime_error {
public:
    TrajectoryParseError(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

    [[nodiscard]] std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Reads a line-delimited trajectory file. Blank lines are skipped; anything
/// else malformed aborts with the 1-based line number.
std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path);
std::vector<TrajectoryRecord> parse_trajectory(std::istream& in);

struct MetricsOptions {
    /// Records outside [from_ms, to_ms) are ignored.
    std::int64_t from_ms = std::numeric_limits<std::int64_t>::min();
    std::int64_t to_ms = std::numeric_limits<std::int64_t>::max();
    /// Cross-agent alignment window; one agent delay.
    std::int64_t alignment_tolerance_ms = 100;
};

struct MetricsReport {
    /// Smallest distance between two agents at aligned timestamps; +inf with
    /// fewer than two agents.
    double min_pairwise_distance = std::numeric_limits<double>::infinity();
    std::size_t boundary_violations = 0;
    /// Averaged over every record in the window; NaN without points of interest.
    double mean_distance_to_nearest_poi = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, double> per_agent_mean_distance_to_nearest_poi;
    std::map<std::string, double> per_agent_path_length;
    std::size_t records = 0;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

Json to_json(const MetricsReport& report);

/// Points of interest as the environment publishes them at run time t: the
/// tick at t carries the initial points rotated floor(t / delay) + 1 times.
std::vector<Position2D> points_of_interest_at(const EnvironmentConfig& env, std::int64_t t_ms);

/// Offline hypothesis metrics, computed exhaustively. Duplicate (agent, t_ms)
/// records are collapsed to the first occurrence.
MetricsReport compute_metrics(const std::vector<TrajectoryRecord>& records, const EnvironmentConfig& env,
                              const MetricsOptions& options = {});
MetricsReport compute_metrics(const std::filesystem::path& trajectory_file, const EnvironmentConfig& env,
                              const MetricsOptions& options = {});

}  // namespace fieldswarm
