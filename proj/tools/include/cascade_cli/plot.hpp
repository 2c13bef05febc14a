#pragma once

// Static SVG output: trajectory projections and box sets.

#include <cascade/chainrec.hpp>
#include <cascade/flow.hpp>

#include <string>
#include <vector>

namespace cascade::cli {

struct AxisRange {
    double lo = 0.0;
    double hi = 1.0;
};

struct PlotFrame {
    std::size_t x = 0;
    std::size_t y = 1;
    AxisRange x_range;
    AxisRange y_range;
    bool x_circle = false;
    bool y_circle = false;
    std::string x_label;
    std::string y_label;
};

/// Frame for projecting `region` onto axes (x, y). Circle axes span
/// [-pi, pi]; line axes span the region bounds. Throws InputError when an
/// axis is out of range or x == y.
[[nodiscard]] PlotFrame make_frame(const RegionSpec& region, std::size_t x, std::size_t y,
                                   const std::vector<std::string>& labels);

/// Widens line axes to include every trajectory point.
void fit_to(PlotFrame& frame, const std::vector<Trajectory>& trajectories);

/// One polyline per trajectory, split wherever a circle coordinate wraps.
[[nodiscard]] std::string trajectory_svg(const std::vector<Trajectory>& trajectories, const PlotFrame& frame);

/// Projected rectangles of the listed boxes, plus equilibria as dots.
[[nodiscard]] std::string boxes_svg(const BoxCover& cover, const std::vector<std::size_t>& boxes,
                                    const std::vector<PointCoords>& equilibria, const PlotFrame& frame);

}  // namespace cascade::cli
