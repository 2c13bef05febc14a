#include "cascade_cli/plot.hpp"

#include <cascade/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace cascade::cli {

namespace {

constexpr double kSize = 480.0;
constexpr double kMargin = 48.0;
constexpr double kPlot = kSize - 2.0 * kMargin;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

double px(const PlotFrame& f, double v) {
    return kMargin + (v - f.x_range.lo) / (f.x_range.hi - f.x_range.lo) * kPlot;
}

double py(const PlotFrame& f, double v) {
    return kMargin + kPlot - (v - f.y_range.lo) / (f.y_range.hi - f.y_range.lo) * kPlot;
}

void header(std::ostringstream& os, const PlotFrame& f) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kSize) << "\" height=\"" << num(kSize)
       << "\" viewBox=\"0 0 " << num(kSize) << ' ' << num(kSize) << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << num(kSize) << "\" height=\"" << num(kSize) << "\" fill=\"white\"/>\n";
    os << "<rect x=\"" << num(kMargin) << "\" y=\"" << num(kMargin) << "\" width=\"" << num(kPlot) << "\" height=\""
       << num(kPlot) << "\" fill=\"none\" stroke=\"black\"/>\n";
    char buf[64];
    auto ticks = [&](double lo, double hi, bool horizontal) {
        for (double v : {lo, 0.5 * (lo + hi), hi}) {
            std::snprintf(buf, sizeof buf, "%.3g", v);
            if (horizontal) {
                os << "<text x=\"" << num(px(f, v)) << "\" y=\"" << num(kMargin + kPlot + 16.0)
                   << "\" font-size=\"11\" text-anchor=\"middle\">" << buf << "</text>\n";
            } else {
                os << "<text x=\"" << num(kMargin - 6.0) << "\" y=\"" << num(py(f, v) + 4.0)
                   << "\" font-size=\"11\" text-anchor=\"end\">" << buf << "</text>\n";
            }
        }
    };
    ticks(f.x_range.lo, f.x_range.hi, true);
    ticks(f.y_range.lo, f.y_range.hi, false);
    os << "<text x=\"" << num(kMargin + 0.5 * kPlot) << "\" y=\"" << num(kSize - 10.0)
       << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(f.x_label) << "</text>\n";
    os << "<text x=\"14\" y=\"" << num(kMargin + 0.5 * kPlot) << "\" font-size=\"13\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 14 " << num(kMargin + 0.5 * kPlot) << ")\">" << escape(f.y_label) << "</text>\n";
}

}  // namespace

PlotFrame make_frame(const RegionSpec& region, std::size_t x, std::size_t y, const std::vector<std::string>& labels) {
    const std::size_t n = region.dim();
    if (x >= n || y >= n) {
        throw InputError("plot axes (" + std::to_string(x) + ", " + std::to_string(y) + ") out of range for dimension " +
                         std::to_string(n));
    }
    if (x == y) {
        throw InputError("plot axes must differ");
    }
    PlotFrame f;
    f.x = x;
    f.y = y;
    f.x_circle = region.space().is_circle(x);
    f.y_circle = region.space().is_circle(y);
    f.x_range = f.x_circle ? AxisRange{-kPi, kPi} : AxisRange{region.bounds(x).lo, region.bounds(x).hi};
    f.y_range = f.y_circle ? AxisRange{-kPi, kPi} : AxisRange{region.bounds(y).lo, region.bounds(y).hi};
    f.x_label = x < labels.size() ? labels[x] : "coord_" + std::to_string(x);
    f.y_label = y < labels.size() ? labels[y] : "coord_" + std::to_string(y);
    return f;
}

void fit_to(PlotFrame& frame, const std::vector<Trajectory>& trajectories) {
    const auto xi = static_cast<Eigen::Index>(frame.x);
    const auto yi = static_cast<Eigen::Index>(frame.y);
    for (const auto& traj : trajectories) {
        for (const auto& p : traj.points) {
            if (!frame.x_circle) {
                frame.x_range.lo = std::min(frame.x_range.lo, p[xi]);
                frame.x_range.hi = std::max(frame.x_range.hi, p[xi]);
            }
            if (!frame.y_circle) {
                frame.y_range.lo = std::min(frame.y_range.lo, p[yi]);
                frame.y_range.hi = std::max(frame.y_range.hi, p[yi]);
            }
        }
    }
}

std::string trajectory_svg(const std::vector<Trajectory>& trajectories, const PlotFrame& frame) {
    std::ostringstream os;
    header(os, frame);
    const auto xi = static_cast<Eigen::Index>(frame.x);
    const auto yi = static_cast<Eigen::Index>(frame.y);
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
        const Trajectory& traj = trajectories[k];
        const char* color = kPalette[k % std::size(kPalette)];
        std::vector<std::vector<std::pair<double, double>>> segments(1);
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const PointCoords& p = traj.points[i];
            if (i > 0) {
                const PointCoords& q = traj.points[i - 1];
                const bool wrapped = (frame.x_circle && std::abs(p[xi] - q[xi]) > kPi) ||
                                     (frame.y_circle && std::abs(p[yi] - q[yi]) > kPi);
                if (wrapped) {
                    segments.emplace_back();
                }
            }
            segments.back().emplace_back(px(frame, p[xi]), py(frame, p[yi]));
        }
        for (const auto& seg : segments) {
            if (seg.size() < 2) {
                continue;
            }
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
            for (std::size_t i = 0; i < seg.size(); ++i) {
                os << (i ? " " : "") << num(seg[i].first) << ',' << num(seg[i].second);
            }
            os << "\"/>\n";
        }
        if (!traj.empty()) {
            const PointCoords& s = traj.points.front();
            os << "<circle cx=\"" << num(px(frame, s[xi])) << "\" cy=\"" << num(py(frame, s[yi]))
               << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string boxes_svg(const BoxCover& cover, const std::vector<std::size_t>& boxes,
                      const std::vector<PointCoords>& equilibria, const PlotFrame& frame) {
    std::ostringstream os;
    header(os, frame);
    const auto xi = static_cast<Eigen::Index>(frame.x);
    const auto yi = static_cast<Eigen::Index>(frame.y);
    const double hx = cover.half_widths()[xi];
    const double hy = cover.half_widths()[yi];
    std::set<std::pair<std::int64_t, std::int64_t>> drawn;
    for (std::size_t b : boxes) {
        const auto& cell = cover.cell(b);
        if (!drawn.insert({cell[frame.x], cell[frame.y]}).second) {
            continue;
        }
        const PointCoords c = cover.center(b);
        const double x0 = px(frame, c[xi] - hx);
        const double x1 = px(frame, c[xi] + hx);
        const double y0 = py(frame, c[yi] + hy);
        const double y1 = py(frame, c[yi] - hy);
        os << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(x1 - x0) << "\" height=\""
           << num(y1 - y0) << "\" fill=\"#1f77b4\" fill-opacity=\"0.5\" stroke=\"#1f77b4\" stroke-width=\"0.5\"/>\n";
    }
    for (const auto& e : equilibria) {
        os << "<circle cx=\"" << num(px(frame, e[xi])) << "\" cy=\"" << num(py(frame, e[yi]))
           << "\" r=\"3\" fill=\"#d62728\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace cascade::cli
