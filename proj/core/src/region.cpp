#include "cascade/region.hpp"

#include "cascade/errors.hpp"

#include <cmath>

namespace cascade {

RegionSpec::RegionSpec(SpaceSpec space, std::vector<Interval> line_bounds)
    : space_(std::move(space)) {
    std::size_t next_line = 0;
    bounds_.reserve(space_.dim());
    for (std::size_t i = 0; i < space_.dim(); ++i) {
        if (space_.is_circle(i)) {
            bounds_.push_back({-kPi, kPi});
            continue;
        }
        if (next_line >= line_bounds.size()) {
            throw InputError("region: missing bounds for line factor " + std::to_string(i));
        }
        const Interval b = line_bounds[next_line++];
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi)) {
            throw InputError("region: need lo < hi on line factor " + std::to_string(i));
        }
        bounds_.push_back(b);
    }
    if (next_line != line_bounds.size()) {
        throw InputError("region: " + std::to_string(line_bounds.size()) +
                         " line bounds given for " + std::to_string(next_line) + " line factors");
    }
}

RegionSpec RegionSpec::symmetric(SpaceSpec space, double half_width) {
    std::size_t lines = 0;
    for (auto kind : space.factors()) {
        lines += kind == FactorKind::Line ? 1 : 0;
    }
    return RegionSpec(std::move(space),
                      std::vector<Interval>(lines, Interval{-half_width, half_width}));
}

std::vector<Interval> RegionSpec::line_bounds() const {
    std::vector<Interval> out;
    for (std::size_t i = 0; i < dim(); ++i) {
        if (!space_.is_circle(i)) {
            out.push_back(bounds_[i]);
        }
    }
    return out;
}

PointCoords RegionSpec::lower() const {
    PointCoords p(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) {
        p[static_cast<Eigen::Index>(i)] = bounds_[i].lo;
    }
    return p;
}

PointCoords RegionSpec::upper() const {
    PointCoords p(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) {
        p[static_cast<Eigen::Index>(i)] = bounds_[i].hi;
    }
    return p;
}

PointCoords RegionSpec::center() const { return 0.5 * (lower() + upper()); }

PointCoords RegionSpec::half_widths() const { return 0.5 * (upper() - lower()); }

bool RegionSpec::contains(const PointCoords& p) const {
    if (static_cast<std::size_t>(p.size()) != dim()) {
        throw InputError("region: point dimension mismatch");
    }
    for (std::size_t i = 0; i < dim(); ++i) {
        if (space_.is_circle(i)) {
            continue;
        }
        const double v = p[static_cast<Eigen::Index>(i)];
        if (!(v >= bounds_[i].lo && v <= bounds_[i].hi)) {
            return false;
        }
    }
    return true;
}

PointCoords RegionSpec::sample(Rng& rng) const {
    PointCoords p(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) {
        p[static_cast<Eigen::Index>(i)] = rng.uniform(bounds_[i].lo, bounds_[i].hi);
    }
    return canonicalize(space_, p);
}

RegionSpec RegionSpec::scaled(double factor) const {
    std::vector<Interval> lines;
    for (const auto& b : line_bounds()) {
        const double half = 0.5 * b.width() * factor;
        lines.push_back({b.mid() - half, b.mid() + half});
    }
    return RegionSpec(space_, std::move(lines));
}

}  // namespace cascade
