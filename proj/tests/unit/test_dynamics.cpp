#include "systems.hpp"

#include <cascade/errors.hpp>
#include <cascade/random.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace cascade;
using namespace fixtures;

TEST(Dynamics, InnerLoopField) {
    auto g = example_cascade().inner();
    EXPECT_LT(eval_field(g, pt({0.0, 0.0})).norm(), 1e-15);
    EXPECT_LT(eval_field(g, pt({kPi, 0.0})).norm(), 1e-15);
}

TEST(Dynamics, OuterLoopField) {
    auto cas = example_cascade();
    auto f = cas.outer_field(pt({kPi / 2, 0.0}), pt({0.0, 0.0}));
    EXPECT_NEAR(f[0], 0.0, 1e-15);
    EXPECT_NEAR(f[1], -1.0, 1e-15);
}

TEST(Dynamics, NonFiniteFieldNamesPoint) {
    SystemDef bad(line(), [](const PointCoords& p, TangentCoords& out) { out[0] = 1.0 / p[0]; });
    try {
        (void)bad.eval(pt({0.0}));
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find('0'), std::string::npos);
    }
}

TEST(Dynamics, UnforcedOuter) {
    auto cas = example_cascade();
    auto u = unforced_outer(cas);
    Rng rng(3);
    auto region = ts1_box(4.0);
    for (int k = 0; k < 100; ++k) {
        auto x = region.sample(rng);
        auto v = u.eval(x);
        EXPECT_EQ(v[0], x[1]);
        EXPECT_NEAR(v[1], -(std::sin(x[0]) + x[1]), 1e-15);
    }
    EXPECT_LT(u.eval(pt({0.0, 0.0})).norm(), 1e-15);
}

TEST(Dynamics, Interconnection) {
    auto cas = example_cascade();
    EXPECT_EQ(interconnection(cas, pt({1.0, 2.0}), pt({0.0, 0.0})).norm(), 0.0);
    auto h = interconnection(cas, pt({kPi / 2, 1.0}), pt({kPi / 2, 0.0}));
    EXPECT_NEAR(h[0], 0.0, 1e-15);
    EXPECT_NEAR(h[1], 4.0, 1e-14);
    // (1 - cos 2 phi)(sin theta + thetadot)
    Rng rng(4);
    auto region = ts1_box(4.0);
    for (int k = 0; k < 100; ++k) {
        auto x = region.sample(rng);
        auto y = region.sample(rng);
        auto hv = interconnection(cas, x, y);
        EXPECT_NEAR(hv[1], (1.0 - std::cos(2.0 * y[0])) * (std::sin(x[0]) + x[1]), 1e-13);
    }
}

TEST(Dynamics, CascadeRejectsNonEquilibrium) {
    EXPECT_THROW(CascadeDef(ts1(), [](const PointCoords&, const PointCoords&, TangentCoords& o) { o.setZero(); },
                            pendulum(), pt({1.0, 0.0})),
                 InputError);
}

TEST(Dynamics, GradientSystem) {
    auto sys = make_gradient_system(circle(), one_minus_cos());
    EXPECT_EQ(sys.kind(), SystemKind::Gradient);
    for (double th : {-3.0, -1.0, 0.2, 2.5}) {
        EXPECT_NEAR(sys.eval(pt({th}))[0], -std::sin(th), 1e-15);
    }
    EXPECT_NEAR(sys.eval(pt({0.0}))[0], 0.0, 1e-15);
    auto flat = make_gradient_system(circle(), ScalarField::constant(circle(), 3.0));
    EXPECT_EQ(flat.eval(pt({1.0}))[0], 0.0);

    // Metric scales the gradient by its inverse.
    Eigen::MatrixXd m(1, 1);
    m << 4.0;
    auto scaled = make_gradient_system(SpaceSpec({FactorKind::Circle}, m), one_minus_cos());
    EXPECT_NEAR(scaled.eval(pt({1.0}))[0], -std::sin(1.0) / 4.0, 1e-15);
}

TEST(Dynamics, MechanicalSystem) {
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    auto sys = make_mechanical_system(circle(), one, one, one_minus_cos());
    EXPECT_EQ(sys.kind(), SystemKind::Mechanical);
    ASSERT_EQ(sys.dim(), 2u);
    EXPECT_TRUE(sys.space().is_circle(0));
    EXPECT_FALSE(sys.space().is_circle(1));
    auto ref = pendulum();
    Rng rng(5);
    auto region = ts1_box(4.0);
    for (int k = 0; k < 100; ++k) {
        auto p = region.sample(rng);
        EXPECT_NEAR((sys.eval(p) - ref.eval(p)).norm(), 0.0, 1e-15);
    }
    EXPECT_NEAR(sys.eval(pt({0.0, 0.0})).norm(), 0.0, 1e-15);
    EXPECT_NEAR(sys.eval(pt({-kPi, 0.0})).norm(), 0.0, 1e-15);

    Eigen::MatrixXd two = 2.0 * one;
    auto heavy = make_mechanical_system(circle(), two, one, one_minus_cos());
    auto v = heavy.eval(pt({0.7, -0.3}));
    EXPECT_NEAR(v[0], -0.3, 1e-15);
    EXPECT_NEAR(v[1], -(std::sin(0.7) - 0.3) / 2.0, 1e-15);

    EXPECT_THROW((void)make_mechanical_system(circle(), -one, one, one_minus_cos()), InputError);
    EXPECT_THROW((void)make_mechanical_system(circle(), one, 0.0 * one, one_minus_cos()), InputError);
}

TEST(Dynamics, TotalEnergy) {
    auto w = total_energy(Eigen::MatrixXd::Identity(1, 1), one_minus_cos());
    EXPECT_NEAR(w(pt({kPi, 1.0})), 2.5, 1e-15);
    EXPECT_EQ(w(pt({0.0, 0.0})), 0.0);
    EXPECT_NEAR(w(pt({0.4, -1.2})), 1.0 - std::cos(0.4) + 0.72, 1e-15);
    EXPECT_EQ(w.space().dim(), 2u);
}

TEST(Dynamics, LieDerivative) {
    auto w = energy();
    auto cas = example_cascade();
    auto x = pt({kPi / 2, 1.0});
    auto y = pt({kPi / 2, 0.0});
    EXPECT_NEAR(lie_derivative(w, interconnection(cas, x, y), x), 4.0, 1e-14);
    EXPECT_EQ(lie_derivative(w, TangentCoords::Zero(2), x), 0.0);
    Rng rng(6);
    auto region = ts1_box(4.0);
    for (int k = 0; k < 100; ++k) {
        auto xs = region.sample(rng);
        auto ys = region.sample(rng);
        double expected = (1.0 - std::cos(2.0 * ys[0])) * (std::sin(xs[0]) + xs[1]) * xs[1];
        EXPECT_NEAR(lie_derivative(w, interconnection(cas, xs, ys), xs), expected, 1e-12);
    }
}

TEST(Dynamics, FiniteDifferenceJacobian) {
    auto sys = pendulum();
    auto j = sys.jacobian(pt({0.3, 0.5}));
    EXPECT_NEAR(j(0, 0), 0.0, 1e-8);
    EXPECT_NEAR(j(0, 1), 1.0, 1e-8);
    EXPECT_NEAR(j(1, 0), -std::cos(0.3), 1e-8);
    EXPECT_NEAR(j(1, 1), -1.0, 1e-8);
    EXPECT_EQ(fd_step(0.0), 1e-6);
    EXPECT_EQ(fd_step(1e3), 1e-5);
}

TEST(DynamicsProperty, AnalyticGradientsMatchFiniteDifferences) {
    Eigen::MatrixXd kappa(2, 2);
    kappa << 2.0, 0.3, 0.3, 1.0;
    ScalarField v2(
        SpaceSpec({FactorKind::Circle, FactorKind::Circle}),
        [](const PointCoords& q) { return 2.0 - std::cos(q[0]) - std::cos(q[1]) + 0.1 * std::sin(q[0] - q[1]); },
        [](const PointCoords& q) {
            const double c = 0.1 * std::cos(q[0] - q[1]);
            return pt({std::sin(q[0]) + c, std::sin(q[1]) - c});
        });
    std::vector<ScalarField> fields{energy(), one_minus_cos(), half_square_plane(), example_alpha(),
                                    total_energy(kappa, v2), total_energy(Eigen::MatrixXd::Identity(1, 1), one_minus_cos())};
    Rng rng(7);
    for (const auto& f : fields) {
        ASSERT_TRUE(f.has_analytic_gradient());
        auto region = RegionSpec::symmetric(f.space(), 4.0);
        for (int k = 0; k < 1000; ++k) {
            auto p = region.sample(rng);
            auto a = f.gradient(p);
            auto d = f.finite_difference_gradient(p);
            ASSERT_LE((a - d).norm(), 1e-5 * std::max(1.0, a.norm())) << p.transpose();
        }
    }
}

TEST(DynamicsProperty, CascadeConsistency) {
    auto cas = example_cascade();
    auto full = cas.full_system();
    ASSERT_EQ(full.dim(), 4u);
    auto region = RegionSpec::symmetric(full.space(), 4.0);
    Rng rng(8);
    for (int k = 0; k < 1000; ++k) {
        auto z = region.sample(rng);
        auto x = cas.outer_part(z);
        auto y = cas.inner_part(z);
        auto v = full.eval(z);
        auto f = cas.outer_field(x, y);
        auto g = cas.inner().eval(y);
        ASSERT_EQ(v.head(2), f);
        ASSERT_EQ(v.tail(2), g);
        auto f0 = cas.outer_field(x, cas.inner_equilibrium());
        ASSERT_LE((f - (f0 + interconnection(cas, x, y))).norm(), 1e-14);
        ASSERT_EQ(cas.join(x, y), z);
    }
}
