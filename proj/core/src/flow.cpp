#include "cascade/flow.hpp"

#include "cascade/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

namespace cascade {

namespace {

// Dormand-Prince 5(4) tableau with Hairer's continuous extension.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// PI controller constants (Hairer & Wanner, dopri5).
constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - 0.75 * kBeta;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                  double tol) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double scale = tol + tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = err[i] / scale;
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(err.size()));
}

bool exceeds_line_bound(const SpaceSpec& space, const PointCoords& p, double bound) {
    for (std::size_t i = 0; i < space.dim(); ++i) {
        if (!space.is_circle(i) && std::abs(p[static_cast<Eigen::Index>(i)]) > bound) {
            return true;
        }
    }
    return false;
}

}  // namespace

Trajectory flow(const SystemDef& sys, const PointCoords& p0, double t_end, const FlowOptions& options) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw PreconditionError("flow: t_end must be positive and finite");
    }
    if (!(options.tol > 0.0)) {
        throw PreconditionError("flow: tol must be positive");
    }
    if (options.record == Record::Grid && !(options.sample_dt > 0.0)) {
        throw PreconditionError("flow: sample_dt must be positive");
    }
    const SpaceSpec& space = sys.space();
    if (!p0.allFinite()) {
        throw NumericError("flow: non-finite initial point");
    }
    const double tol = options.tol;
    const Eigen::Index n = static_cast<Eigen::Index>(sys.dim());

    Trajectory traj;
    PointCoords y = canonicalize(space, p0);
    traj.times.push_back(0.0);
    traj.points.push_back(y);

    Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    Eigen::VectorXd stage(n), y1(n), err(n);
    Eigen::VectorXd r2(n), r3(n), r4(n), r5(n);

    sys.eval_into(y, k1);
    traj.stats.evaluations = 1;
    if (!k1.allFinite()) {
        throw NumericError("flow: non-finite field value at the initial point");
    }

    // Initial step guess from the ratio of state and derivative scales.
    double h;
    {
        Eigen::VectorXd scale = (tol + tol * y.cwiseAbs().array()).matrix();
        const double d0 = (y.array() / scale.array()).matrix().norm() / std::sqrt(double(n));
        const double d1n = (k1.array() / scale.array()).matrix().norm() / std::sqrt(double(n));
        h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h = std::min({h, t_end, 0.1});
        h = std::max(h, 1e-6 * std::min(1.0, t_end));
    }

    double t = 0.0;
    double err_old = 1e-4;
    std::size_t grid_index = 1;
    bool last_rejected = false;

    while (t < t_end) {
        if (traj.stats.steps + traj.stats.rejected >= options.max_steps) {
            throw DivergenceError("flow: step budget exhausted", t);
        }
        if (h < options.min_step) {
            throw DivergenceError("flow: step size underflow at t = " + std::to_string(t), t);
        }
        const bool final_step = t + h >= t_end;
        if (final_step) {
            h = t_end - t;
        }

        stage = y + h * (a21 * k1);
        sys.eval_into(stage, k2);
        stage = y + h * (a31 * k1 + a32 * k2);
        sys.eval_into(stage, k3);
        stage = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        sys.eval_into(stage, k4);
        stage = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        sys.eval_into(stage, k5);
        stage = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        sys.eval_into(stage, k6);
        y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        sys.eval_into(y1, k7);
        traj.stats.evaluations += 6;

        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double e = error_norm(err, y, y1, tol);
        if (!std::isfinite(e) || !k7.allFinite()) {
            ++traj.stats.rejected;
            h *= kFacMin;
            last_rejected = true;
            continue;
        }

        if (e > 1.0) {
            ++traj.stats.rejected;
            h *= std::max(kFacMin, kSafety * std::pow(e, -0.2));
            last_rejected = true;
            continue;
        }

        // Accepted.
        const double t_new = final_step ? t_end : t + h;
        if (options.record == Record::Grid) {
            const Eigen::VectorXd ydiff = y1 - y;
            r2 = ydiff;
            r3 = h * k1 - ydiff;
            r4 = ydiff - h * k7 - r3;
            r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            for (;; ++grid_index) {
                const double tg = static_cast<double>(grid_index) * options.sample_dt;
                if (tg > t_new || tg >= t_end) {
                    break;
                }
                const double th = (tg - t) / h;
                const double th1 = 1.0 - th;
                PointCoords yg = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
                if (tg > traj.times.back()) {
                    traj.times.push_back(tg);
                    traj.points.push_back(canonicalize(space, yg));
                }
            }
        }

        if (!y1.allFinite()) {
            throw NumericError("flow: non-finite state at t = " + std::to_string(t_new));
        }
        y = canonicalize(space, y1);
        k1 = k7;
        t = t_new;
        ++traj.stats.steps;
        traj.stats.max_error_estimate = std::max(traj.stats.max_error_estimate, e);

        if (exceeds_line_bound(space, y, options.max_line)) {
            throw DivergenceError("flow: line coordinate exceeded divergence bound at t = " +
                                      std::to_string(t),
                                  t);
        }

        if (options.record == Record::Steps || (t >= t_end && traj.times.back() < t)) {
            traj.times.push_back(t);
            traj.points.push_back(y);
        }

        e = std::max(e, 1e-10);
        double fac = kSafety * std::pow(e, -kExpo) * std::pow(err_old, kBeta);
        fac = std::clamp(fac, kFacMin, kFacMax);
        if (last_rejected) {
            fac = std::min(fac, 1.0);
        }
        err_old = std::max(e, 1e-4);
        last_rejected = false;
        h *= fac;
    }
    return traj;
}

Trajectory flow(const SystemDef& sys, const PointCoords& p0, double t_end, double tol) {
    FlowOptions options;
    options.tol = tol;
    return flow(sys, p0, t_end, options);
}

PointCoords flow_to(const SystemDef& sys, const PointCoords& p0, double t_end, double tol) {
    FlowOptions options;
    options.tol = tol;
    options.record = Record::Final;
    return flow(sys, p0, t_end, options).final_point();
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const std::size_t n = traj.points.empty() ? 0 : static_cast<std::size_t>(traj.points.front().size());
    os << 't';
    for (std::size_t i = 0; i < n; ++i) {
        os << ",coord_" << i;
    }
    os << '\n';
    const auto old_precision = os.precision(17);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        os << traj.times[k];
        for (Eigen::Index i = 0; i < traj.points[k].size(); ++i) {
            os << ',' << traj.points[k][i];
        }
        os << '\n';
    }
    os.precision(old_precision);
}

}  // namespace cascade
