#include <cascade/errors.hpp>
#include <cascade/geometry.hpp>
#include <cascade/random.hpp>
#include <cascade/region.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace cascade;

namespace {

SpaceSpec circle() { return SpaceSpec({FactorKind::Circle}); }
SpaceSpec cylinder() { return SpaceSpec({FactorKind::Circle, FactorKind::Line}); }

PointCoords pt(std::initializer_list<double> v) {
    PointCoords p(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) p[i++] = x;
    return p;
}

// Random point with circle coordinates deliberately outside [-pi, pi).
PointCoords wild_point(const SpaceSpec& s, Rng& rng) {
    PointCoords p(static_cast<Eigen::Index>(s.dim()));
    for (std::size_t i = 0; i < s.dim(); ++i) {
        p[static_cast<Eigen::Index>(i)] = s.is_circle(i) ? rng.uniform(-20.0, 20.0) : rng.uniform(-5.0, 5.0);
    }
    return p;
}

}  // namespace

TEST(Geometry, CanonicalizeExamples) {
    auto c = canonicalize(circle(), pt({3.0 * kPi / 2.0}));
    EXPECT_NEAR(c[0], -kPi / 2.0, 1e-15);

    auto d = canonicalize(cylinder(), pt({kTwoPi + 0.1, 5.0}));
    EXPECT_NEAR(d[0], 0.1, 1e-14);
    EXPECT_EQ(d[1], 5.0);
}

TEST(Geometry, PiMapsToMinusPi) {
    EXPECT_EQ(wrap_angle(kPi), -kPi);
    EXPECT_EQ(wrap_angle(-kPi), -kPi);
    EXPECT_EQ(wrap_angle(0.0), 0.0);
}

TEST(Geometry, DistExamples) {
    EXPECT_NEAR(dist(circle(), pt({0.0}), pt({kPi})), kPi, 1e-15);
    EXPECT_NEAR(dist(cylinder(), pt({0.0, 0.0}), pt({kPi / 2.0, 1.0})), std::sqrt(kPi * kPi / 4.0 + 1.0), 1e-15);
    // Shorter arc across the cut.
    EXPECT_NEAR(dist(circle(), pt({kPi - 0.1}), pt({-kPi + 0.1})), 0.2, 1e-14);
}

TEST(Geometry, StepPointExamples) {
    auto a = step_point(circle(), pt({0.0}), pt({1.0}), kPi);
    EXPECT_NEAR(a[0], -kPi, 1e-15);
    auto b = step_point(circle(), pt({kPi - 0.1}), pt({1.0}), 0.2);
    EXPECT_NEAR(b[0], -kPi + 0.1, 1e-14);
}

TEST(Geometry, StepPointRejectsNonFinite) {
    EXPECT_THROW((void)step_point(circle(), pt({0.0}), pt({std::numeric_limits<double>::quiet_NaN()}), 1.0),
                 NumericError);
}

TEST(Geometry, DimensionMismatch) {
    EXPECT_THROW((void)canonicalize(cylinder(), pt({0.0})), InputError);
}

TEST(Geometry, MetricValidation) {
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(SpaceSpec({FactorKind::Circle, FactorKind::Line}, bad), InputError);
    Eigen::MatrixXd asym(2, 2);
    asym << 2.0, 0.5, 0.0, 2.0;
    EXPECT_THROW(SpaceSpec({FactorKind::Circle, FactorKind::Line}, asym), InputError);
    EXPECT_THROW(SpaceSpec({FactorKind::Circle}, Eigen::MatrixXd::Identity(2, 2)), InputError);
}

TEST(Geometry, ProductIsBlockDiagonal) {
    Eigen::MatrixXd m(1, 1);
    m << 3.0;
    auto p = SpaceSpec::product(SpaceSpec({FactorKind::Circle}, m), cylinder());
    ASSERT_EQ(p.dim(), 3u);
    EXPECT_EQ(p.metric()(0, 0), 3.0);
    EXPECT_EQ(p.metric()(0, 1), 0.0);
    EXPECT_EQ(p.metric()(2, 2), 1.0);
    EXPECT_TRUE(p.is_circle(1));
}

TEST(Geometry, MetricDistance) {
    Eigen::MatrixXd m(2, 2);
    m << 2.0, 0.5, 0.5, 1.0;
    SpaceSpec s({FactorKind::Circle, FactorKind::Line}, m);
    PointCoords d = pt({0.3, -0.4});
    double expected = std::sqrt(d.dot(m * d));
    EXPECT_NEAR(dist(s, pt({0.0, 0.0}), d), expected, 1e-15);
}

TEST(GeometryProperty, DistanceAxioms) {
    Eigen::MatrixXd m(3, 3);
    m << 2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5;
    SpaceSpec s({FactorKind::Circle, FactorKind::Line, FactorKind::Circle}, m);
    SpaceSpec flat({FactorKind::Circle, FactorKind::Line, FactorKind::Circle});
    Rng rng(11);
    for (int k = 0; k < 10000; ++k) {
        auto p = wild_point(s, rng);
        auto q = wild_point(s, rng);
        auto r = wild_point(s, rng);
        for (const auto* sp : {&flat, &s}) {
            double pq = dist(*sp, p, q);
            double qp = dist(*sp, q, p);
            ASSERT_NEAR(pq, qp, 1e-12);
            ASSERT_GE(pq, 0.0);
            ASSERT_NEAR(dist(*sp, p, p), 0.0, 1e-12);
            // The shortest-arc displacement is exact only for diagonal metrics.
            if (sp == &flat) {
                ASSERT_LE(dist(*sp, p, r), pq + dist(*sp, q, r) + 1e-12);
            }
        }
    }
}

TEST(GeometryProperty, CanonicalizeIdempotentAndInRange) {
    SpaceSpec s({FactorKind::Circle, FactorKind::Line, FactorKind::Circle});
    Rng rng(12);
    for (int k = 0; k < 10000; ++k) {
        auto p = wild_point(s, rng);
        auto c = canonicalize(s, p);
        ASSERT_EQ(canonicalize(s, c), c);
        ASSERT_GE(c[0], -kPi);
        ASSERT_LT(c[0], kPi);
        ASSERT_EQ(c[1], p[1]);
    }
}

TEST(GeometryProperty, DistInvariantUnderFullTurns) {
    SpaceSpec s({FactorKind::Circle, FactorKind::Line, FactorKind::Circle});
    Rng rng(13);
    for (int k = 0; k < 10000; ++k) {
        auto p = wild_point(s, rng);
        auto q = wild_point(s, rng);
        auto shifted = p;
        shifted[0] += kTwoPi * static_cast<double>(static_cast<int>(rng.uniform(-3.0, 3.0)));
        shifted[2] -= kTwoPi;
        ASSERT_NEAR(dist(s, p, q), dist(s, shifted, q), 1e-12);
        ASSERT_NEAR(dist(s, p, q), dist(s, canonicalize(s, p), q), 1e-12);
    }
}

TEST(Region, BoundsAndSampling) {
    auto r = RegionSpec::symmetric(cylinder(), 3.0);
    EXPECT_EQ(r.bounds(0).lo, -kPi);
    EXPECT_EQ(r.bounds(1).hi, 3.0);
    EXPECT_EQ(r.half_widths()[1], 3.0);
    Rng rng(1);
    for (int k = 0; k < 1000; ++k) {
        auto p = r.sample(rng);
        ASSERT_TRUE(r.contains(p));
        ASSERT_EQ(canonicalize(r.space(), p), p);
    }
    EXPECT_FALSE(r.contains(pt({0.0, 3.5})));
    EXPECT_EQ(r.scaled(2.0).bounds(1).hi, 6.0);
    EXPECT_THROW(RegionSpec(cylinder(), {Interval{1.0, 1.0}}), InputError);
}

TEST(Random, StreamsAreIndependentOfOrder) {
    Rng a(7, Stream::Basin, 3);
    Rng b(7, Stream::Basin, 3);
    Rng c(7, Stream::Basin, 4);
    Rng d(7, Stream::GrowthX, 3);
    double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_NE(x, c.uniform());
    EXPECT_NE(x, d.uniform());
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
}
