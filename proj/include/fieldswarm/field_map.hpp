#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fieldswarm {

/// Agent-centered square perception grid. Row index i follows body-frame X
/// (front increases i), column index j follows body-frame Y (left increases j).
/// Values are stored row-major.
class FieldMap {
public:
    FieldMap() = default;
    FieldMap(std::size_t size, double extent, double fill = 0.0)
        : size_(size), extent_(extent), values_(size * size, fill) {}
    FieldMap(std::size_t size, double extent, std::vector<double> values);

    [[nodiscard]] std::size_t size() const { return size_; }
    /// Meters covered per half-side.
    [[nodiscard]] double extent() const { return extent_; }
    [[nodiscard]] double pitch() const { return 2.0 * extent_ / static_cast<double>(size_); }

    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values_[i * size_ + j]; }
    double& at(std::size_t i, std::size_t j) { return values_[i * size_ + j]; }

    [[nodiscard]] std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const FieldMap&, const FieldMap&) = default;

private:
    std::size_t size_ = 0;
    double extent_ = 0.0;
    std::vector<double> values_;
};

}  // namespace fieldswarm
