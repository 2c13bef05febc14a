#pragma once

// Adaptive Dormand-Prince 5(4) integration on flat product spaces.

#include "cascade/dynamics.hpp"

#include <cstddef>
#include <vector>

namespace cascade {

struct IntegratorStats {
    std::size_t steps = 0;
    std::size_t rejected = 0;
    std::size_t evaluations = 0;
    double max_error_estimate = 0.0;  ///< largest accepted scaled error norm (<= 1)
};

/// Time-stamped canonical points. Times are strictly increasing.
struct Trajectory {
    std::vector<double> times;
    std::vector<PointCoords> points;
    IntegratorStats stats;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
    [[nodiscard]] bool empty() const noexcept { return times.empty(); }
    [[nodiscard]] const PointCoords& final_point() const { return points.back(); }
    [[nodiscard]] double final_time() const { return times.back(); }
};

enum class Record {
    Steps,  ///< initial point and every accepted step
    Grid,   ///< initial point, multiples of sample_dt, and t_end (dense output)
    Final,  ///< initial point and t_end only
};

struct FlowOptions {
    double tol = 1e-9;          ///< absolute and relative tolerance
    Record record = Record::Steps;
    double sample_dt = 0.1;     ///< used with Record::Grid
    double max_line = 1e6;      ///< divergence bound on line coordinates
    double min_step = 1e-12;    ///< step-size underflow threshold
    std::size_t max_steps = 5'000'000;
};

/// Integrates sys from p0 over [0, t_end].
///
/// Circle coordinates are wrapped after each accepted step; stages within a
/// step share one chart. Throws PreconditionError for t_end <= 0 or tol <= 0,
/// DivergenceError on step underflow, too many steps or a line coordinate
/// beyond max_line, and NumericError if an accepted state is not finite.
[[nodiscard]] Trajectory flow(const SystemDef& sys, const PointCoords& p0, double t_end,
                              const FlowOptions& options = {});

/// Convenience overload: records every accepted step at tolerance tol.
[[nodiscard]] Trajectory flow(const SystemDef& sys, const PointCoords& p0, double t_end, double tol);

/// Final point only.
[[nodiscard]] PointCoords flow_to(const SystemDef& sys, const PointCoords& p0, double t_end,
                                  double tol);

/// Writes `t,coord_0,...,coord_{n-1}` with 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace cascade
