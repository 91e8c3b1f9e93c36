#include "fieldswarm/environment.hpp"

#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

namespace fieldswarm {

std::vector<Position2D> rotate_points(std::span<const Position2D> points, const Position2D& center,
                                      double theta_degrees) {
    if (theta_degrees == 0.0) return {points.begin(), points.end()};  // exact, no round-off
    const double theta = theta_degrees * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    std::vector<Position2D> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        const double dx = p.x - center.x;
        const double dy = p.y - center.y;
        out.push_back({center.x + c * dx - s * dy, center.y + s * dx + c * dy});
    }
    return out;
}

FieldModulationEnvironment::FieldModulationEnvironment(EnvironmentConfig config, Bus& bus)
    : config_(std::move(config)), bus_(bus), points_(config_.modulation_points) {}

void FieldModulationEnvironment::step(std::int64_t now_ms) {
    std::vector<Position2D> rotated = rotate_points(points_, config_.rotation_center, config_.theta_degrees);
    EnvironmentState state{config_.limits, rotated, now_ms, sequence_ + 1};
    try {
        bus_.publish(topics::kEnvironmentState, to_json(state));
    } catch (const BusError& e) {
        // Retry next cycle from the same points.
        spdlog::debug("environment: publish failed: {}", e.what());
        return;
    }
    points_ = std::move(rotated);
    ++sequence_;
    ++ticks_;
}

void run_environment_loop(const EnvironmentConfig& config, Bus& bus, const RunClock& clock) {
    FieldModulationEnvironment env(config, bus);
    run_loop(env, bus, clock);
}

}  // namespace fieldswarm
