#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldswarm/app_process.hpp"
#include "fieldswarm/config.hpp"

namespace fieldswarm {

class LogWriteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One line of the trajectory file: exactly {"t_ms","agent_id","x","y","action"}.
struct TrajectoryRecord {
    std::int64_t t_ms = 0;
    std::string agent_id;
    double x = 0.0;
    double y = 0.0;
    Action action = Action::Stop;

    friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

/// One line of a field file: exactly {"t_ms","agent_id","size","values"}.
struct FieldRecord {
    std::int64_t t_ms = 0;
    std::string agent_id;
    std::size_t size = 0;
    std::vector<double> values;

    friend bool operator==(const FieldRecord&, const FieldRecord&) = default;
};

Json to_json(const TrajectoryRecord& r);
TrajectoryRecord trajectory_record_from_json(const Json& j);
Json to_json(const FieldRecord& r);
FieldRecord field_record_from_json(const Json& j);

/// Appends one TrajectoryRecord per agent whose state changed since the
/// previous cycle. A failed write raises the stop flag and throws.
class PositionLogger final : public AppProcess {
public:
    PositionLogger(Bus& bus, const std::filesystem::path& output, std::int64_t delay_ms);

    [[nodiscard]] std::string name() const override { return "logger/position"; }
    [[nodiscard]] std::int64_t delay_ms() const override { return delay_ms_; }
    void step(std::int64_t now_ms) override;
    void finish(std::int64_t now_ms) override;
    [[nodiscard]] std::uint64_t ticks() const override { return ticks_; }
    [[nodiscard]] std::uint64_t records_written() const { return records_; }

private:
    Bus& bus_;
    std::filesystem::path path_;
    std::ofstream out_;
    std::int64_t delay_ms_;
    std::map<std::string, std::uint64_t> last_sequence_;
    std::uint64_t ticks_ = 0;
    std::uint64_t records_ = 0;
};

/// Persists the perception map of a single agent, one record per new field.
class FieldLogger final : public AppProcess {
public:
    FieldLogger(Bus& bus, std::string agent_id, const std::filesystem::path& output, std::int64_t delay_ms);

    [[nodiscard]] std::string name() const override { return "logger/field/" + agent_id_; }
    [[nodiscard]] std::int64_t delay_ms() const override { return delay_ms_; }
    void step(std::int64_t now_ms) override;
    void finish(std::int64_t now_ms) override;
    [[nodiscard]] std::uint64_t ticks() const override { return ticks_; }
    [[nodiscard]] std::uint64_t records_written() const { return records_; }

private:
    Bus& bus_;
    std::string agent_id_;
    std::filesystem::path path_;
    std::ofstream out_;
    std::int64_t delay_ms_;
    std::uint64_t last_sequence_ = 0;
    std::uint64_t ticks_ = 0;
    std::uint64_t records_ = 0;
};

/// In-run checker: tracks the smallest distance between any two agents whose
/// published states carry the same timestamp, from `from_ms` on.
class MinDistanceMonitor final : public AppProcess {
public:
    MinDistanceMonitor(Bus& bus, std::int64_t delay_ms, std::int64_t from_ms)
        : bus_(bus), delay_ms_(delay_ms), from_ms_(from_ms) {}

    [[nodiscard]] std::string name() const override { return "monitor/min_distance"; }
    [[nodiscard]] std::int64_t delay_ms() const override { return delay_ms_; }
    void step(std::int64_t now_ms) override;
    [[nodiscard]] std::uint64_t ticks() const override { return ticks_; }

    [[nodiscard]] double min_distance() const { return min_distance_; }

private:
    Bus& bus_;
    std::int64_t delay_ms_;
    std::int64_t from_ms_;
    std::uint64_t ticks_ = 0;
    double min_distance_ = std::numeric_limits<double>::infinity();
};

void run_position_logger(Bus& bus, const std::filesystem::path& output, std::int64_t delay_ms, const RunClock& clock);
void run_field_logger(Bus& bus, const std::string& agent_id, const std::filesystem::path& output,
                      std::int64_t delay_ms, const RunClock& clock);

}  // namespace fieldswarm
