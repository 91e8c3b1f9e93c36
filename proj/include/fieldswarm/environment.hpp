#pragma once

#include <span>
#include <vector>

#include "fieldswarm/app_process.hpp"
#include "fieldswarm/config.hpp"

namespace fieldswarm {

/// Counter-clockwise rotation of every point about `center`.
std::vector<Position2D> rotate_points(std::span<const Position2D> points, const Position2D& center,
                                      double theta_degrees);

/// Publishes the arena limits and the points of interest, rotating the points
/// by theta about the rotation center on every iteration (incrementally, so
/// the k-th publish carries the points rotated k times).
class FieldModulationEnvironment final : public AppProcess {
public:
    FieldModulationEnvironment(EnvironmentConfig config, Bus& bus);

    [[nodiscard]] std::string name() const override { return "environment/main"; }
    [[nodiscard]] std::int64_t delay_ms() const override { return config_.delay_ms; }
    void step(std::int64_t now_ms) override;
    [[nodiscard]] std::uint64_t ticks() const override { return ticks_; }

    [[nodiscard]] const std::vector<Position2D>& points() const { return points_; }

private:
    EnvironmentConfig config_;
    Bus& bus_;
    std::vector<Position2D> points_;
    std::uint64_t ticks_ = 0;
    std::uint64_t sequence_ = 0;
};

void run_environment_loop(const EnvironmentConfig& config, Bus& bus, const RunClock& clock);

}  // namespace fieldswarm
