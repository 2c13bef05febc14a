#include "systems.hpp"

#include <cascade/errors.hpp>
#include <cascade/flow.hpp>
#include <cascade/random.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace cascade;
using namespace fixtures;

TEST(Flow, EquilibriumDoesNotDrift) {
    // Stable points only: at the saddle sin(-pi) = -1.2e-16 in double grows like e^{0.618 t}.
    for (const auto& [sys, p0] : std::vector<std::pair<SystemDef, PointCoords>>{
             {pendulum(), pt({0.0, 0.0})},
             {gradient_circle(), pt({0.0})},
             {example_cascade().full_system(), pt({0.0, 0.0, 0.0, 0.0})},
             {harmonic_oscillator(), pt({0.0, 0.0})}}) {
        auto traj = flow(sys, p0, 100.0, 1e-9);
        for (const auto& p : traj.points) {
            ASSERT_LT(dist(sys.space(), p, p0), 1e-6);
        }
    }
}

TEST(Flow, Semigroup) {
    auto sys = pendulum();
    const double tol = 1e-10;
    Rng rng(21);
    auto region = ts1_box(3.0);
    for (int k = 0; k < 20; ++k) {
        auto p0 = region.sample(rng);
        auto direct = flow_to(sys, p0, 7.0, tol);
        auto split = flow_to(sys, flow_to(sys, p0, 3.0, tol), 4.0, tol);
        EXPECT_LT(dist(sys.space(), direct, split), 10.0 * tol) << p0.transpose();
    }
}

TEST(Flow, PendulumConverges) {
    auto sys = pendulum();
    auto end = flow_to(sys, pt({3.0, 0.0}), 50.0, 1e-9);
    EXPECT_LT(dist(sys.space(), end, pt({0.0, 0.0})), 1e-4);
    auto oracle = flow_to(sys, pt({3.0, 0.0}), 50.0, 1e-12);
    EXPECT_LT(dist(sys.space(), end, oracle), 1e-7);
}

TEST(Flow, LinearDecayMatchesClosedForm) {
    auto sys = linear_decay();
    auto traj = flow(sys, pt({2.0}), 5.0, {.tol = 1e-10, .record = Record::Grid, .sample_dt = 0.5});
    ASSERT_EQ(traj.size(), 11u);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        EXPECT_NEAR(traj.times[i], 0.5 * static_cast<double>(i), 1e-12);
        EXPECT_NEAR(traj.points[i][0], 2.0 * std::exp(-traj.times[i]), 1e-9);
    }
}

TEST(Flow, HarmonicOscillatorDenseOutput) {
    auto sys = harmonic_oscillator();
    auto traj = flow(sys, pt({1.0, 0.0}), 10.0, {.tol = 1e-10, .record = Record::Grid, .sample_dt = 0.1});
    for (std::size_t i = 0; i < traj.size(); ++i) {
        double t = traj.times[i];
        ASSERT_NEAR(traj.points[i][0], std::cos(t), 1e-7) << t;
        ASSERT_NEAR(traj.points[i][1], -std::sin(t), 1e-7) << t;
    }
}

TEST(Flow, CircleCoordinatesWrap) {
    // theta' = 1 winds around the circle.
    SystemDef spin(circle(), [](const PointCoords&, TangentCoords& out) { out[0] = 1.0; });
    auto traj = flow(spin, pt({0.0}), 10.0, 1e-9);
    for (const auto& p : traj.points) {
        ASSERT_GE(p[0], -kPi);
        ASSERT_LT(p[0], kPi);
    }
    EXPECT_NEAR(traj.final_point()[0], wrap_angle(10.0), 1e-9);
}

TEST(Flow, RecordModes) {
    auto sys = pendulum();
    auto fin = flow(sys, pt({1.0, 0.0}), 3.0, {.tol = 1e-9, .record = Record::Final});
    ASSERT_EQ(fin.size(), 2u);
    EXPECT_EQ(fin.times.front(), 0.0);
    EXPECT_EQ(fin.final_time(), 3.0);
    auto steps = flow(sys, pt({1.0, 0.0}), 3.0, 1e-9);
    EXPECT_EQ(steps.size(), steps.stats.steps + 1);
    EXPECT_EQ(dist(sys.space(), steps.final_point(), fin.final_point()), 0.0);
    for (std::size_t i = 1; i < steps.size(); ++i) {
        ASSERT_GT(steps.times[i], steps.times[i - 1]);
    }
    EXPECT_LE(steps.stats.max_error_estimate, 1.0);
}

TEST(Flow, Preconditions) {
    auto sys = pendulum();
    EXPECT_THROW((void)flow(sys, pt({0.0, 0.0}), 0.0, 1e-9), PreconditionError);
    EXPECT_THROW((void)flow(sys, pt({0.0, 0.0}), 1.0, 0.0), PreconditionError);
    EXPECT_THROW((void)flow(sys, pt({0.0}), 1.0, 1e-9), InputError);
}

TEST(Flow, BlowupIsDivergence) {
    SystemDef blowup(line(), [](const PointCoords& p, TangentCoords& out) { out[0] = p[0] * p[0]; });
    try {
        (void)flow(blowup, pt({1.0}), 2.0, 1e-9);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        // Exact solution 1/(1-t) blows up at t = 1.
        EXPECT_GT(e.last_time(), 0.9);
        EXPECT_LE(e.last_time(), 1.0);
    }
}

TEST(Flow, TrajectoryCsv) {
    Trajectory traj;
    traj.times = {0.0, 0.5};
    traj.points = {pt({0.1, -2.0}), pt({1.0 / 3.0, 4.0})};
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    EXPECT_EQ(os.str(),
              "t,coord_0,coord_1\n"
              "0,0.10000000000000001,-2\n"
              "0.5,0.33333333333333331,4\n");
}

TEST(FlowProperty, EnergyMonotoneAlongMechanicalFlows) {
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    auto sys = make_mechanical_system(circle(), one, one, one_minus_cos());
    auto w = total_energy(one, one_minus_cos());
    const double tol = 1e-9;
    Rng rng(22);
    auto region = ts1_box(4.0);
    for (int k = 0; k < 100; ++k) {
        auto traj = flow(sys, region.sample(rng), 30.0, tol);
        for (std::size_t i = 1; i < traj.size(); ++i) {
            ASSERT_LE(w(traj.points[i]), w(traj.points[i - 1]) + 10.0 * tol) << "trajectory " << k;
        }
    }
}

TEST(FlowProperty, TighterToleranceIsMoreAccurate) {
    // Per-step control gives global error ~ tol^{4/5}: one halving buys about
    // 1.74x, so the 2x reduction is checked across two halvings.
    auto sys = pendulum();
    auto p0 = pt({3.0, 0.0});
    auto oracle = flow_to(sys, p0, 20.0, 1e-12);
    for (double tol : {1e-5, 1e-6, 1e-7}) {
        double coarse = dist(sys.space(), flow_to(sys, p0, 20.0, tol), oracle);
        double half = dist(sys.space(), flow_to(sys, p0, 20.0, tol / 2.0), oracle);
        double quarter = dist(sys.space(), flow_to(sys, p0, 20.0, tol / 4.0), oracle);
        EXPECT_LT(half, coarse) << "tol " << tol;
        EXPECT_LE(2.0 * quarter, coarse) << "tol " << tol;
    }
}
