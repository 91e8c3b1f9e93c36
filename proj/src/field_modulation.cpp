#include "fieldswarm/field_modulation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fieldswarm {

namespace {

// Cells whose center sits at exactly the modulation radius must not flip in
// or out on rounding noise.
constexpr double kRadiusSlack = 1e-12;

void deposit(FieldMap& out, const ModulationParams& params, std::size_t offset, double pitch,
             GridIndex center, double amplitude) {
    const auto reach = static_cast<std::ptrdiff_t>(std::floor(params.modulation_radius / pitch)) + 1;
    const auto ci = static_cast<std::ptrdiff_t>(center.i);
    const auto cj = static_cast<std::ptrdiff_t>(center.j);
    const auto lo = static_cast<std::ptrdiff_t>(offset);
    const auto hi = lo + static_cast<std::ptrdiff_t>(out.size()) - 1;

    const std::ptrdiff_t a0 = std::max(lo, ci - reach);
    const std::ptrdiff_t a1 = std::min(hi, ci + reach);
    const std::ptrdiff_t b0 = std::max(lo, cj - reach);
    const std::ptrdiff_t b1 = std::min(hi, cj + reach);
    for (std::ptrdiff_t a = a0; a <= a1; ++a) {
        for (std::ptrdiff_t b = b0; b <= b1; ++b) {
            double d = pitch * std::hypot(static_cast<double>(a - ci), static_cast<double>(b - cj));
            double v = gaussian_contribution(d, amplitude, params.modulation_radius);
            if (v != 0.0) out.at(static_cast<std::size_t>(a - lo), static_cast<std::size_t>(b - lo)) += v;
        }
    }
}

}  // namespace

bool ModulationParams::valid() const {
    return vicinity > 0.0 && std::isfinite(vicinity) && field_size > 0 && field_size % 3 == 0 &&
           clip_factor >= 1.0 && std::isfinite(clip_factor) && modulation_radius > 0.0 &&
           std::abs(negative_amplitude) > positive_amplitude && std::isfinite(boundary_value);
}

std::size_t ModulationParams::extended_size() const {
    return static_cast<std::size_t>(std::lround(static_cast<double>(field_size) * clip_factor));
}

double gaussian_contribution(double distance, double amplitude, double radius) {
    if (distance > radius * (1.0 + kRadiusSlack)) return 0.0;
    const double sigma = radius / 3.0;
    return amplitude * std::exp(-(distance * distance) / (2.0 * sigma * sigma));
}

GridIndex project_to_grid(double dx, double dy, double extent, std::size_t size) {
    auto axis = [&](double d) {
        double cell = std::floor((d + extent) / (2.0 * extent) * static_cast<double>(size));
        cell = std::clamp(cell, 0.0, static_cast<double>(size - 1));
        return static_cast<std::size_t>(cell);
    };
    return {axis(dx), axis(dy)};
}

FieldMap build_field(const Position2D& self, std::span<const Position2D> neighbors,
                     std::span<const Position2D> points_of_interest, const SpaceLimits& limits,
                     const ModulationParams& params) {
    if (!params.valid()) throw std::invalid_argument("invalid modulation parameters");

    const std::size_t ext_size = params.extended_size();
    const double ext_extent = params.extended_extent();
    const double pitch = 2.0 * ext_extent / static_cast<double>(ext_size);
    const std::size_t offset = (ext_size - params.field_size) / 2;

    // Only the cropped window is materialized; deposits are restricted to it,
    // which is the same as building the full extended grid and cropping.
    FieldMap out(params.field_size, params.vicinity);

    auto modulate = [&](std::span<const Position2D> points, double amplitude) {
        for (const auto& p : points) {
            const double dx = p.x - self.x;
            const double dy = p.y - self.y;
            if (std::abs(dx) > ext_extent || std::abs(dy) > ext_extent) continue;
            deposit(out, params, offset, pitch, project_to_grid(dx, dy, ext_extent, ext_size), amplitude);
        }
    };
    modulate(neighbors, params.negative_amplitude);
    modulate(points_of_interest, params.positive_amplitude);

    // Limits are compared in agent-relative coordinates.
    const double rx_min = limits.x_min - self.x;
    const double rx_max = limits.x_max - self.x;
    const double ry_min = limits.y_min - self.y;
    const double ry_max = limits.y_max - self.y;
    auto center_of = [&](std::size_t k) {
        return -ext_extent + (static_cast<double>(k + offset) + 0.5) * pitch;
    };
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double cx = center_of(i);
        const bool row_out = cx < rx_min || cx > rx_max;
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double cy = center_of(j);
            if (row_out || cy < ry_min || cy > ry_max) out.at(i, j) = params.boundary_value;
        }
    }
    return out;
}

}  // namespace fieldswarm
