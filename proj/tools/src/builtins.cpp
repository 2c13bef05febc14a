#include "cascade_cli/builtins.hpp"

#include <cascade/errors.hpp>

#include <cmath>

namespace cascade::cli {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

SpaceSpec circle() { return SpaceSpec({FactorKind::Circle}); }
SpaceSpec circle_line() { return SpaceSpec({FactorKind::Circle, FactorKind::Line}); }
SpaceSpec plane() { return SpaceSpec({FactorKind::Line, FactorKind::Line}); }

PointCoords vec(std::initializer_list<double> xs) {
    PointCoords p(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        p[i++] = x;
    }
    return p;
}

ScalarField one_minus_cos() {
    return ScalarField(
        circle(), [](const PointCoords& q) { return 1.0 - std::cos(q[0]); },
        [](const PointCoords& q) { return vec({std::sin(q[0])}); }, "1-cos(q)");
}

// W(q, qdot) = 1 - cos q + qdot^2 / 2 on S^1 x R.
ScalarField pendulum_energy(const std::string& q = "q") {
    const ScalarField w = total_energy(MatrixXd::Identity(1, 1), one_minus_cos());
    return ScalarField(
        w.space(), [w](const PointCoords& p) { return w(p); }, [w](const PointCoords& p) { return w.gradient(p); },
        "1-cos(" + q + ")+" + q + "dot^2/2");
}

SystemDef damped_pendulum() {
    SystemDef sys(
        circle_line(),
        [](const PointCoords& p, TangentCoords& out) {
            out[0] = p[1];
            out[1] = -(std::sin(p[0]) + p[1]);
        },
        SystemKind::Mechanical,
        [](const PointCoords& p) {
            MatrixXd j(2, 2);
            j << 0.0, 1.0, -std::cos(p[0]), -1.0;
            return j;
        },
        "pendulum");
    return sys;
}

SystemDef undamped_pendulum() {
    return SystemDef(
        circle_line(),
        [](const PointCoords& p, TangentCoords& out) {
            out[0] = p[1];
            out[1] = -std::sin(p[0]);
        },
        SystemKind::Generic,
        [](const PointCoords& p) {
            MatrixXd j(2, 2);
            j << 0.0, 1.0, -std::cos(p[0]), 0.0;
            return j;
        },
        "undamped-pendulum");
}

GrowthCertificate example_certificate() {
    ScalarField alpha(
        circle_line(), [](const PointCoords& y) { return 4.0 * (1.0 - std::cos(2.0 * y[0])); },
        [](const PointCoords& y) { return vec({8.0 * std::sin(2.0 * y[0]), 0.0}); }, "4*(1-cos(2*phi))");
    return {pendulum_energy("theta"), std::move(alpha), ScalarField::constant(circle_line(), 0.0), 4.0};
}

RegionSpec velocity_box(double v) { return RegionSpec(circle_line(), {{-v, v}}); }

RegionSpec torus_bundle_box(double v) {
    return RegionSpec(SpaceSpec::product(circle_line(), circle_line()), {{-v, v}, {-v, v}});
}

// Cascades driven by a pendulum-type inner loop on TS^1 with outer state (theta, thetadot).
Problem pendulum_driven(std::string name, std::string description, CouplingFn outer, SystemDef inner) {
    CascadeDef cas(circle_line(), std::move(outer), std::move(inner), vec({0.0, 0.0}), name);
    Problem p{.name = name,
              .description = std::move(description),
              .variables = {"theta", "thetadot", "phi", "phidot"},
              .system = std::nullopt,
              .cascade = std::move(cas),
              .lyapunov = pendulum_energy("theta"),
              .certificate = example_certificate(),
              .region = torus_bundle_box(4.0),
              .outer_region = velocity_box(4.0),
              .inner_region = velocity_box(4.0),
              .chain_region = velocity_box(3.0),
              .target = vec({0.0, 0.0, 0.0, 0.0}),
              .regression_points = {}};
    return p;
}

Problem paper_example() {
    Problem p = pendulum_driven(
        "paper-example", "pendulum on TS^1 driven by a damped pendulum through cos(2 phi)",
        [](const PointCoords& x, const PointCoords& y, TangentCoords& out) {
            out[0] = x[1];
            out[1] = -(std::sin(x[0]) + x[1]) * std::cos(2.0 * y[0]);
        },
        damped_pendulum());
    p.regression_points = example_regression_points();
    return p;
}

Problem undamped_inner() {
    return pendulum_driven(
        "undamped-inner", "paper-example with an undamped inner pendulum (negative control)",
        [](const PointCoords& x, const PointCoords& y, TangentCoords& out) {
            out[0] = x[1];
            out[1] = -(std::sin(x[0]) + x[1]) * std::cos(2.0 * y[0]);
        },
        undamped_pendulum());
}

Problem unbounded_interconnection() {
    return pendulum_driven(
        "unbounded-interconnection",
        "damped outer pendulum with interconnection phi^2 thetadot^3 (negative control)",
        [](const PointCoords& x, const PointCoords& y, TangentCoords& out) {
            out[0] = x[1];
            out[1] = -(std::sin(x[0]) + x[1]) + y[0] * y[0] * x[1] * x[1] * x[1];
        },
        damped_pendulum());
}

Problem limit_cycle_outer() {
    CascadeDef cas(
        plane(),
        [](const PointCoords& x, const PointCoords&, TangentCoords& out) {
            const double r2 = x.squaredNorm();
            out[0] = -x[1] + x[0] * (1.0 - r2);
            out[1] = x[0] + x[1] * (1.0 - r2);
        },
        damped_pendulum(), vec({0.0, 0.0}), "limit-cycle-outer");
    ScalarField v(
        plane(), [](const PointCoords& x) { return 0.5 * x.squaredNorm(); },
        [](const PointCoords& x) { return TangentCoords(x); }, "(x1^2+x2^2)/2");
    GrowthCertificate cert{v, ScalarField::constant(circle_line(), 0.0), ScalarField::constant(circle_line(), 0.0),
                           1.0};
    const SpaceSpec full = SpaceSpec::product(plane(), circle_line());
    Problem p{.name = "limit-cycle-outer",
              .description = "outer loop with an attracting limit cycle r = 1 and h = 0 (negative control)",
              .variables = {"x1", "x2", "phi", "phidot"},
              .system = std::nullopt,
              .cascade = std::move(cas),
              .lyapunov = v,
              .certificate = std::move(cert),
              .region = RegionSpec(full, {{-2.0, 2.0}, {-2.0, 2.0}, {-4.0, 4.0}}),
              .outer_region = RegionSpec(plane(), {{-2.0, 2.0}, {-2.0, 2.0}}),
              .inner_region = velocity_box(4.0),
              .chain_region = RegionSpec(plane(), {{-2.0, 2.0}, {-2.0, 2.0}}),
              .target = vec({0.0, 0.0, 0.0, 0.0}),
              .regression_points = {}};
    return p;
}

Problem plain(std::string name, std::string description, std::vector<std::string> variables, SystemDef sys,
              std::optional<ScalarField> lyapunov, RegionSpec region, PointCoords target,
              std::optional<RegionSpec> chain_region = std::nullopt) {
    Problem p{.name = std::move(name),
              .description = std::move(description),
              .variables = std::move(variables),
              .system = std::move(sys),
              .cascade = std::nullopt,
              .lyapunov = std::move(lyapunov),
              .certificate = std::nullopt,
              .region = region,
              .outer_region = std::nullopt,
              .inner_region = std::nullopt,
              .chain_region = chain_region.value_or(region),
              .target = std::move(target),
              .regression_points = {}};
    return p;
}

}  // namespace

SystemDef Problem::full() const {
    if (cascade) {
        return cascade->full_system();
    }
    return *system;
}

std::vector<PointCoords> example_regression_points() {
    return {vec({1.618, 3.4072, 1.5977, 3.1428}), vec({5.5617, 4.1329, 5.0026, -4.0129}),
            vec({1.4482, 3.4431, 1.2237, -2.7408})};
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {
        "paper-example",     "pendulum",        "gradient-circle", "undamped-pendulum", "undamped-inner",
        "limit-cycle-outer", "unbounded-interconnection", "harmonic-oscillator", "linear-decay",
        "zero-field"};
    return names;
}

Problem make_builtin(const std::string& name) {
    if (name == "paper-example") {
        return paper_example();
    }
    if (name == "pendulum") {
        return plain("pendulum", "damped pendulum phi'' = -(sin phi + phi') on TS^1", {"phi", "phidot"},
                     damped_pendulum(), pendulum_energy("phi"), velocity_box(4.0), vec({0.0, 0.0}), velocity_box(3.0));
    }
    if (name == "gradient-circle") {
        const ScalarField v = one_minus_cos();
        return plain("gradient-circle", "gradient flow of 1 - cos theta on S^1", {"theta"},
                     make_gradient_system(circle(), v), v, RegionSpec(circle(), {}), vec({0.0}));
    }
    if (name == "undamped-pendulum") {
        return plain("undamped-pendulum", "phi'' = -sin phi (conservative; negative control)", {"phi", "phidot"},
                     undamped_pendulum(), pendulum_energy("phi"), velocity_box(4.0), vec({0.0, 0.0}), velocity_box(3.0));
    }
    if (name == "undamped-inner") {
        return undamped_inner();
    }
    if (name == "limit-cycle-outer") {
        return limit_cycle_outer();
    }
    if (name == "unbounded-interconnection") {
        return unbounded_interconnection();
    }
    if (name == "harmonic-oscillator") {
        SystemDef sys(
            plane(),
            [](const PointCoords& p, TangentCoords& out) {
                out[0] = p[1];
                out[1] = -p[0];
            },
            SystemKind::Generic, {}, "harmonic-oscillator");
        ScalarField v(
            plane(), [](const PointCoords& p) { return 0.5 * p.squaredNorm(); },
            [](const PointCoords& p) { return TangentCoords(p); }, "(x^2+v^2)/2");
        return plain("harmonic-oscillator", "x'' = -x on R^2 (negative control)", {"x", "v"}, std::move(sys), v,
                     RegionSpec(plane(), {{-4.0, 4.0}, {-4.0, 4.0}}), vec({0.0, 0.0}));
    }
    if (name == "linear-decay") {
        const SpaceSpec line({FactorKind::Line});
        SystemDef sys(
            line, [](const PointCoords& p, TangentCoords& out) { out[0] = -p[0]; }, SystemKind::Generic,
            [](const PointCoords&) { return MatrixXd::Constant(1, 1, -1.0); }, "linear-decay");
        ScalarField v(
            line, [](const PointCoords& p) { return 0.5 * p[0] * p[0]; },
            [](const PointCoords& p) { return TangentCoords(p); }, "x^2/2");
        return plain("linear-decay", "x' = -x on R", {"x"}, std::move(sys), v, RegionSpec(line, {{-10.0, 10.0}}),
                     vec({0.0}));
    }
    if (name == "zero-field") {
        const SpaceSpec line({FactorKind::Line});
        SystemDef sys(
            line, [](const PointCoords&, TangentCoords& out) { out[0] = 0.0; }, SystemKind::Generic,
            [](const PointCoords&) { return MatrixXd::Zero(1, 1); }, "zero-field");
        return plain("zero-field", "x' = 0 on R (every point is an equilibrium)", {"x"}, std::move(sys), std::nullopt,
                     RegionSpec(line, {{-1.0, 1.0}}), vec({0.0}));
    }
    throw InputError("unknown system '" + name + "' (see list-examples)");
}

}  // namespace cascade::cli
