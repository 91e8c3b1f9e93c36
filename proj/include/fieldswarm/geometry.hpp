#pragma once

#include <cmath>
#include <stdexcept>

namespace fieldswarm {

/// A point in the global arena frame, meters. +X is front, +Y is left.
struct Position2D {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Position2D&, const Position2D&) = default;

    [[nodiscard]] bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(const Position2D& a, const Position2D& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Axis-aligned arena rectangle.
struct SpaceLimits {
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;

    friend bool operator==(const SpaceLimits&, const SpaceLimits&) = default;

    [[nodiscard]] bool valid() const {
        return std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) &&
               std::isfinite(y_max) && x_min < x_max && y_min < y_max;
    }

    [[nodiscard]] bool contains(const Position2D& p) const {
        return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
    }

    [[nodiscard]] Position2D center() const {
        return {(x_min + x_max) / 2.0, (y_min + y_max) / 2.0};
    }
};

}  // namespace fieldswarm
