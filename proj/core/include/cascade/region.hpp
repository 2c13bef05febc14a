#pragma once

#include "cascade/geometry.hpp"
#include "cascade/random.hpp"

#include <vector>

namespace cascade {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double width() const noexcept { return hi - lo; }
    [[nodiscard]] double mid() const noexcept { return 0.5 * (lo + hi); }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Compact search window: the full circle on circle factors and a closed
/// interval on each line factor.
class RegionSpec {
public:
    /// `line_bounds` lists one interval per line factor, in factor order.
    /// Throws InputError unless lo < hi on every interval.
    RegionSpec(SpaceSpec space, std::vector<Interval> line_bounds);

    /// Every line factor gets [-half_width, half_width].
    [[nodiscard]] static RegionSpec symmetric(SpaceSpec space, double half_width);

    [[nodiscard]] const SpaceSpec& space() const noexcept { return space_; }
    [[nodiscard]] std::size_t dim() const noexcept { return space_.dim(); }

    /// Bounds of factor i; circle factors report [-pi, pi).
    [[nodiscard]] const Interval& bounds(std::size_t i) const { return bounds_.at(i); }
    [[nodiscard]] std::vector<Interval> line_bounds() const;

    [[nodiscard]] PointCoords lower() const;
    [[nodiscard]] PointCoords upper() const;
    [[nodiscard]] PointCoords center() const;
    [[nodiscard]] PointCoords half_widths() const;

    /// Line coordinates within their closed intervals; circle coordinates always inside.
    [[nodiscard]] bool contains(const PointCoords& p) const;

    /// Uniform sample in chart coordinates, canonical.
    [[nodiscard]] PointCoords sample(Rng& rng) const;

    /// Line intervals scaled about their midpoints.
    [[nodiscard]] RegionSpec scaled(double factor) const;

    friend bool operator==(const RegionSpec& a, const RegionSpec& b) {
        return a.space_ == b.space_ && a.bounds_ == b.bounds_;
    }

private:
    SpaceSpec space_;
    std::vector<Interval> bounds_;
};

}  // namespace cascade
