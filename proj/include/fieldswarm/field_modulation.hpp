#pragma once

#include <cstddef>
#include <span>

#include "fieldswarm/field_map.hpp"
#include "fieldswarm/geometry.hpp"

namespace fieldswarm {

/// Parameters of the perception map. Neighbours deposit negative bumps,
/// points of interest positive ones; the negative amplitude must dominate so
/// collision avoidance wins over reward seeking.
struct ModulationParams {
    double vicinity = 0.5;  // meters per half-side of the final map
    std::size_t field_size = 84;
    double clip_factor = 2.0;
    double negative_amplitude = -1.5;
    double positive_amplitude = 1.0;
    double modulation_radius = 0.5;  // meters; bumps are truncated here
    double boundary_value = -1.0;

    [[nodiscard]] bool valid() const;
    /// Side of the construction grid before cropping.
    [[nodiscard]] std::size_t extended_size() const;
    [[nodiscard]] double extended_extent() const { return vicinity * clip_factor; }
};

struct GridIndex {
    std::size_t i = 0;
    std::size_t j = 0;

    friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// Truncated gaussian bump: amplitude * exp(-d^2 / (2 sigma^2)) with
/// sigma = radius / 3 for d <= radius, exactly zero beyond.
double gaussian_contribution(double distance, double amplitude, double radius);

/// Maps an offset relative to the map center to its cell. Out-of-range
/// offsets clamp to the border cells.
GridIndex project_to_grid(double dx, double dy, double extent, std::size_t size);

/// Builds the agent-centered perception map.
///
/// Modulations are deposited on a grid clip_factor times larger than the
/// final map (same cell pitch), so bumps centred outside the final window
/// still leak into it. Each point snaps to its projected cell and its bump is
/// evaluated at cell-center distances in meters; overlapping bumps add up.
/// The central field_size window is then cropped and every cell whose center
/// lies outside `limits` is overwritten with the boundary value.
FieldMap build_field(const Position2D& self, std::span<const Position2D> neighbors,
                     std::span<const Position2D> points_of_interest, const SpaceLimits& limits,
                     const ModulationParams& params);

}  // namespace fieldswarm
