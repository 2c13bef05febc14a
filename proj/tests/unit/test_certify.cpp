#include "systems.hpp"

#include <cascade/certify.hpp>
#include <cascade/errors.hpp>
#include <cascade/flow.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace cascade;
using namespace fixtures;

namespace {

PointCoords from_json(const nlohmann::json& a) {
    PointCoords p(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) p[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return p;
}

CascadeCertifyParams quick_params(unsigned threads = 1) {
    CascadeCertifyParams p{.inner_region = ts1_box(4.0), .outer_region = ts1_box(4.0)};
    p.inner.basin.n = 1000;
    p.outer.basin.n = 1000;
    p.outer.chain.depth = 5;
    p.outer.chain_region = ts1_box(3.0);
    p.outer.gradient.n_traj = 20;
    p.growth.n_x = 100;
    p.growth.n_y = 50;
    p.comparison_trajectories = 5;
    p.cascade_basin.n = 200;
    p.cascade_basin.horizon = 200.0;
    p.seed = 5;
    p.threads = threads;
    p.inner.basin.threads = p.outer.basin.threads = p.cascade_basin.threads = threads;
    p.outer.chain.threads = p.outer.gradient.threads = p.growth.threads = threads;
    return p;
}

const CertificationReport& example_report() {
    static const CertificationReport r = certify_cascade(example_cascade(), energy(), example_certificate(), quick_params());
    return r;
}

}  // namespace

TEST(Verdict, CombineAndStrings) {
    EXPECT_EQ(combine({Verdict::Pass, Verdict::Pass}), Verdict::Pass);
    EXPECT_EQ(combine({Verdict::Pass, Verdict::Inconclusive}), Verdict::Inconclusive);
    EXPECT_EQ(combine({Verdict::Inconclusive, Verdict::Fail}), Verdict::Fail);
    for (auto v : {Verdict::Pass, Verdict::Fail, Verdict::Inconclusive}) {
        EXPECT_EQ(verdict_from_string(to_string(v)), v);
    }
    EXPECT_EQ(to_string(Verdict::Pass), "PASS");
}

TEST(Wilson, KnownValues) {
    // 95% Wilson interval for 10000/10000: n / (n + z^2).
    const double z = 1.959963984540054;
    EXPECT_NEAR(wilson_lower_bound(10000, 10000), 10000.0 / (10000.0 + z * z), 1e-12);
    EXPECT_NEAR(wilson_lower_bound(50, 100), 0.403831, 1e-6);
    EXPECT_EQ(wilson_lower_bound(0, 0), 0.0);
}

TEST(Basin, LinearDecayConvergesEverywhere) {
    auto est = monte_carlo_basin(linear_decay(), pt({0.0}), RegionSpec(line(), {{-10.0, 10.0}}), {.n = 500});
    EXPECT_EQ(est.n_samples, 500u);
    EXPECT_EQ(est.n_converged, 500u);
    EXPECT_EQ(est.fraction, 1.0);
    EXPECT_TRUE(est.witnesses.empty());
}

TEST(Basin, CountsAddUp) {
    auto est = monte_carlo_basin(pendulum(), pt({0.0, 0.0}), ts1_box(4.0), {.n = 2000, .horizon = 100.0});
    EXPECT_EQ(est.n_samples, est.n_converged + est.n_diverged + est.n_other);
    EXPECT_GE(est.fraction, 0.999);
    EXPECT_LE(est.wilson_lower, est.fraction);
}

TEST(Basin, DeterministicAcrossThreads) {
    auto a = monte_carlo_basin(pendulum(), pt({0.0, 0.0}), ts1_box(4.0), {.n = 300, .seed = 4, .threads = 1});
    auto b = monte_carlo_basin(pendulum(), pt({0.0, 0.0}), ts1_box(4.0), {.n = 300, .seed = 4, .threads = 3});
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(InnerLoop, Verdicts) {
    InnerLoopParams params;
    params.basin.n = 10000;
    auto pend = certify_inner_loop(pendulum(), pt({0.0, 0.0}), ts1_box(4.0), params);
    EXPECT_EQ(pend.verdict, Verdict::Pass) << pend.summary;

    params.basin.n = 500;
    auto osc = certify_inner_loop(harmonic_oscillator(), pt({0.0, 0.0}), RegionSpec::symmetric(plane(), 2.0), params);
    EXPECT_EQ(osc.verdict, Verdict::Fail);
    EXPECT_NE(osc.summary.find("NonHyperbolic"), std::string::npos) << osc.summary;

    auto lin = certify_inner_loop(linear_decay(), pt({0.0}), RegionSpec(line(), {{-10.0, 10.0}}), params);
    EXPECT_EQ(lin.verdict, Verdict::Pass);
    EXPECT_EQ(lin.evidence["basin"]["fraction"].get<double>(), 1.0);

    EXPECT_THROW((void)certify_inner_loop(pendulum(), pt({1.0, 0.0}), ts1_box(4.0), params), PreconditionError);
}

TEST(UnforcedOuter, Verdicts) {
    UnforcedOuterParams params;
    params.basin.n = 2000;
    params.chain_region = ts1_box(3.0);
    params.gradient.n_traj = 20;
    auto ex = certify_unforced_outer(example_cascade(), energy(), ts1_box(4.0), params);
    EXPECT_EQ(ex.verdict, Verdict::Pass) << ex.summary;

    CascadeDef on_circle(
        circle(), [](const PointCoords& x, const PointCoords&, TangentCoords& out) { out[0] = -std::sin(x[0]); },
        pendulum(), pt({0.0, 0.0}));
    UnforcedOuterParams cp;
    cp.basin.n = 1000;
    cp.gradient.n_traj = 20;
    auto gc = certify_unforced_outer(on_circle, one_minus_cos(), RegionSpec(circle(), {}), cp);
    EXPECT_EQ(gc.verdict, Verdict::Pass) << gc.summary;

    UnforcedOuterParams lp;
    lp.basin.n = 500;
    lp.gradient.n_traj = 10;
    lp.chain.depth = 5;
    auto lc = certify_unforced_outer(limit_cycle_cascade(), half_square_plane(), RegionSpec::symmetric(plane(), 2.0), lp);
    EXPECT_EQ(lc.verdict, Verdict::Fail);
}

TEST(Growth, ExampleCertificatePasses) {
    auto entry = verify_growth_certificate(
        example_cascade(), example_certificate(),
        {.n_x = 200, .n_y = 100, .region_x = ts1_box(4.0), .region_y = ts1_box(4.0), .seed = 1});
    EXPECT_EQ(entry.verdict, Verdict::Pass) << entry.summary;
    EXPECT_LE(entry.evidence["max_violation"].get<double>(), 1e-9);
    EXPECT_EQ(entry.evidence["pairs"].get<std::size_t>(), 20000u);
}

TEST(Growth, WeakenedCertificateFailsWithWitness) {
    GrowthCertificate weak{energy(), example_alpha(0.5), ScalarField::constant(ts1(), 0.0), 0.0};
    auto cas = example_cascade();
    auto entry = verify_growth_certificate(cas, weak,
                                           {.n_x = 200, .n_y = 100, .region_x = ts1_box(4.0), .region_y = ts1_box(4.0)});
    EXPECT_EQ(entry.verdict, Verdict::Fail);
    ASSERT_EQ(entry.witnesses.size(), 1u);
    const auto& w = entry.witnesses[0];
    auto x = from_json(w["x"]);
    auto y = from_json(w["y"]);
    double lhs = lie_derivative(weak.W, interconnection(cas, x, y), x);
    double rhs = weak.alpha(y) * weak.W(x) + weak.beta(y);
    EXPECT_GT(lhs - rhs, 1e-9);
    EXPECT_NEAR(lhs, w["lhs"].get<double>(), 1e-12);
    EXPECT_NEAR(rhs, w["rhs"].get<double>(), 1e-12);
}

TEST(Growth, DecoupledCascadePassesTrivially) {
    CascadeDef cas(
        ts1(),
        [](const PointCoords& x, const PointCoords&, TangentCoords& out) {
            out[0] = x[1];
            out[1] = -(std::sin(x[0]) + x[1]);
        },
        pendulum(), pt({0.0, 0.0}));
    GrowthCertificate zero{energy(), ScalarField::constant(ts1(), 0.0), ScalarField::constant(ts1(), 0.0), 1.0};
    auto entry = verify_growth_certificate(cas, zero, {.n_x = 100, .n_y = 50, .region_x = ts1_box(4.0), .region_y = ts1_box(4.0)});
    EXPECT_EQ(entry.verdict, Verdict::Pass) << entry.summary;
    EXPECT_EQ(entry.evidence["max_violation"].get<double>(), 0.0);
}

TEST(Growth, NonVanishingAlphaFails) {
    GrowthCertificate bad{energy(), ScalarField::constant(ts1(), 1.0), ScalarField::constant(ts1(), 0.0), 4.0};
    auto entry = verify_growth_certificate(example_cascade(), bad,
                                           {.n_x = 10, .n_y = 10, .region_x = ts1_box(4.0), .region_y = ts1_box(4.0)});
    EXPECT_EQ(entry.verdict, Verdict::Fail);
}

TEST(Growth, StarvationIsInconclusive) {
    // W never reaches c on the region even after escalation.
    GrowthCertificate far{one_minus_cos(), ScalarField::constant(ts1(), 0.0), ScalarField::constant(ts1(), 0.0), 5.0};
    CascadeDef cas(
        circle(), [](const PointCoords& x, const PointCoords&, TangentCoords& out) { out[0] = -std::sin(x[0]); },
        pendulum(), pt({0.0, 0.0}));
    auto entry = verify_growth_certificate(
        cas, far, {.n_x = 10, .n_y = 10, .region_x = RegionSpec(circle(), {}), .region_y = ts1_box(4.0), .proposal_budget = 1000});
    EXPECT_EQ(entry.verdict, Verdict::Inconclusive) << entry.summary;
}

TEST(Growth, DifferenceQuotients) {
    auto q = difference_quotients(example_cascade(), example_certificate(), 0);
    EXPECT_TRUE(q.vanishing);
    EXPECT_TRUE(q.bounded);
    ASSERT_EQ(q.radii.size(), 4u);
    // alpha is quadratic at 0_Y, so quotients shrink with the radius.
    EXPECT_LT(q.alpha_quotients.back(), q.alpha_quotients.front());

    // |phi|^(1/2) vanishes but is not differentiable at 0.
    ScalarField root(ts1(), [](const PointCoords& y) { return std::sqrt(std::abs(y[0]) + std::abs(y[1])); });
    GrowthCertificate cusp{energy(), root, ScalarField::constant(ts1(), 0.0), 4.0};
    auto r = difference_quotients(example_cascade(), cusp, 0);
    EXPECT_TRUE(r.vanishing);
    EXPECT_FALSE(r.bounded);
}

TEST(Envelope, PendulumRate) {
    auto traj = flow(pendulum(), pt({3.0, 0.0}), 200.0, {.tol = 1e-10, .record = Record::Grid, .sample_dt = 0.05});
    auto fit = estimate_decay_envelope(traj, example_certificate(), ts1(), pt({0.0, 0.0}));
    EXPECT_TRUE(fit.pass) << fit.message;
    EXPECT_NEAR(fit.fitted_rate, 1.0, 0.3);
    EXPECT_NEAR(fit.envelope.omega, fit.fitted_rate / 2.0, 1e-15);
    EXPECT_TRUE(envelope_dominates(traj, example_certificate(), fit.envelope));
    // A is the smallest constant that dominates alpha.
    auto tighter = fit.envelope;
    tighter.A *= 0.99;
    EXPECT_FALSE(envelope_dominates(traj, example_certificate(), tighter));
}

TEST(Envelope, TrajectoryAtEquilibrium) {
    auto traj = flow(pendulum(), pt({0.0, 0.0}), 10.0, {.tol = 1e-10, .record = Record::Grid, .sample_dt = 0.5});
    auto fit = estimate_decay_envelope(traj, example_certificate(), ts1(), pt({0.0, 0.0}));
    EXPECT_TRUE(fit.pass);
    EXPECT_EQ(fit.envelope.A, 0.0);
    EXPECT_TRUE(envelope_dominates(traj, example_certificate(), {0.0, 0.0, 3.0}));
}

TEST(Envelope, NoiseFloorIsExcluded) {
    // phi = e^{-t/2} down to t = 30, then a 1e-8 jitter that stays put.
    Trajectory traj;
    for (int k = 0; k <= 400; ++k) {
        double t = 0.5 * k;
        double phi = t <= 30.0 ? std::exp(-0.5 * t) : 1e-8 * (k % 2 == 0 ? 1.0 : -1.0);
        traj.times.push_back(t);
        traj.points.push_back(pt({phi, 0.0}));
    }
    auto cert = example_certificate();
    auto raw = estimate_decay_envelope(traj, cert, ts1(), pt({0.0, 0.0}));
    auto cut = estimate_decay_envelope(traj, cert, ts1(), pt({0.0, 0.0}), 1e-6);
    EXPECT_EQ(raw.envelope.t_resolved, std::numeric_limits<double>::infinity());
    // e^{-t/2} <= 1e-6 from t = 27.63 on; the grid point after is 28.
    EXPECT_NEAR(cut.envelope.t_resolved, 28.0, 1e-12);
    // Dominating alpha(phi) = 4(1 - cos 2 phi) ~ 8 e^{-t} needs A near 8 before the floor.
    EXPECT_LT(cut.envelope.A, 8.0 * 1.01);
    EXPECT_GT(raw.envelope.A, 1e3 * cut.envelope.A);
    EXPECT_TRUE(cut.pass);
}

TEST(Envelope, NonConvergentIsPrecondition) {
    auto traj = flow(pendulum(), pt({3.0, 0.0}), 5.0, 1e-9);
    EXPECT_THROW((void)estimate_decay_envelope(traj, example_certificate(), ts1(), pt({0.0, 0.0})), PreconditionError);
}

TEST(Comparison, ExampleTrajectory) {
    auto cas = example_cascade();
    auto traj = flow(cas.full_system(), pt({1.6, 3.4, 1.6, 3.1}), 200.0,
                     {.tol = 1e-10, .record = Record::Grid, .sample_dt = 0.05});
    Trajectory inner;
    inner.times = traj.times;
    for (const auto& p : traj.points) inner.points.push_back(cas.inner_part(p));
    auto fit = estimate_decay_envelope(inner, example_certificate(), ts1(), pt({0.0, 0.0}));
    ASSERT_TRUE(fit.pass);
    auto cmp = comparison_bound_check(cas, traj, example_certificate(), fit.envelope);
    EXPECT_TRUE(cmp.pass) << cmp.message;
    EXPECT_FALSE(cmp.vacuous);
    EXPECT_GT(cmp.margin, 0.0);
    EXPECT_GE(cmp.bound, cmp.max_w);

    auto adversarial = comparison_bound_check(cas, traj, example_certificate(), {1e-3, 0.0, 1e-3});
    EXPECT_FALSE(adversarial.pass);
    EXPECT_TRUE(adversarial.envelope_failed);
}

TEST(Comparison, VacuousBelowLevel) {
    auto cas = example_cascade();
    auto traj = flow(cas.full_system(), pt({0.5, 0.0, 0.5, 0.0}), 50.0,
                     {.tol = 1e-10, .record = Record::Grid, .sample_dt = 0.1});
    Trajectory inner;
    inner.times = traj.times;
    for (const auto& p : traj.points) inner.points.push_back(cas.inner_part(p));
    auto fit = estimate_decay_envelope(inner, example_certificate(), ts1(), pt({0.0, 0.0}));
    auto cmp = comparison_bound_check(cas, traj, example_certificate(), fit.envelope);
    EXPECT_TRUE(cmp.pass);
    EXPECT_TRUE(cmp.vacuous);
}

TEST(CertifyCascade, ExampleReport) {
    const auto& r = example_report();
    ASSERT_EQ(r.conditions.size(), 5u);
    const char* ids[] = {"inner_loop", "unforced_outer", "growth_certificate", "comparison_bound", "cascade_stability"};
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(r.conditions[i].id, ids[i]);
        EXPECT_EQ(r.conditions[i].verdict, Verdict::Pass) << ids[i] << ": " << r.conditions[i].summary;
    }
    EXPECT_EQ(r.overall, Verdict::Pass);
    auto j = to_json(r);
    EXPECT_EQ(j["evidence_grade"], "sampled");
    EXPECT_EQ(j["overall"], "PASS");
}

TEST(CertifyCascade, NegativeControls) {
    auto undamped = certify_cascade(undamped_inner_cascade(), energy(), example_certificate(), quick_params());
    EXPECT_EQ(undamped.find("inner_loop")->verdict, Verdict::Fail);
    EXPECT_EQ(undamped.overall, Verdict::Fail);

    auto unbounded = certify_cascade(unbounded_cascade(), energy(), example_certificate(), quick_params());
    EXPECT_EQ(unbounded.find("growth_certificate")->verdict, Verdict::Fail);
    EXPECT_EQ(unbounded.overall, Verdict::Fail);
}

TEST(CertifyProperty, DeterministicAcrossThreadCounts) {
    auto again = certify_cascade(example_cascade(), energy(), example_certificate(), quick_params(3));
    EXPECT_EQ(to_json(example_report()).dump(), to_json(again).dump());
}

TEST(CertifyProperty, BlockStructureAtSliceEquilibria) {
    const auto* c = example_report().find("cascade_stability");
    ASSERT_NE(c, nullptr);
    const auto& blocks = c->evidence["block_structure"];
    ASSERT_EQ(blocks.size(), 2u);
    for (const auto& b : blocks) {
        EXPECT_TRUE(b["ok"].get<bool>());
        EXPECT_LE(b["max_pairing_error"].get<double>(), 1e-6);
    }
}

TEST(CertifyProperty, LocalRate) {
    const auto* c = example_report().find("cascade_stability");
    ASSERT_NE(c, nullptr);
    EXPECT_GE(c->evidence["local_rate"]["min_fitted_rate"].get<double>(), 0.4);
}

TEST(CertifyProperty, GrowthWitnessReevaluates) {
    const auto* g = example_report().find("growth_certificate");
    ASSERT_NE(g, nullptr);
    ASSERT_FALSE(g->witnesses.empty());
    auto cas = example_cascade();
    auto cert = example_certificate();
    for (const auto& w : g->witnesses) {
        auto x = from_json(w["x"]);
        auto y = from_json(w["y"]);
        double lhs = lie_derivative(cert.W, interconnection(cas, x, y), x);
        double rhs = cert.alpha(y) * cert.W(x) + cert.beta(y);
        EXPECT_NEAR(lhs, w["lhs"].get<double>(), 1e-12);
        EXPECT_NEAR(rhs, w["rhs"].get<double>(), 1e-12);
        EXPECT_LE(w["violation"].get<double>(), 1e-9);
    }
}

TEST(CertifyProperty, MonotoneEvidence) {
    // x' = -x + x^3 blows up for |x| > 1; divergence witnesses persist as n grows.
    SystemDef blowup(line(), [](const PointCoords& p, TangentCoords& out) { out[0] = -p[0] + p[0] * p[0] * p[0]; });
    RegionSpec region(line(), {{-1.5, 1.5}});
    auto small = monte_carlo_basin(blowup, pt({0.0}), region, {.n = 50, .horizon = 50.0, .max_witnesses = 1000});
    auto large = monte_carlo_basin(blowup, pt({0.0}), region, {.n = 500, .horizon = 50.0, .max_witnesses = 1000});
    ASSERT_GT(small.n_diverged, 0u);
    EXPECT_GE(large.n_diverged, small.n_diverged);
    for (const auto& w : small.witnesses) {
        bool kept = false;
        for (const auto& v : large.witnesses) kept = kept || v == w;
        EXPECT_TRUE(kept);
    }
    InnerLoopParams params;
    params.basin = {.n = 50, .horizon = 50.0};
    EXPECT_EQ(certify_inner_loop(blowup, pt({0.0}), region, params).verdict, Verdict::Fail);
    params.basin.n = 500;
    EXPECT_EQ(certify_inner_loop(blowup, pt({0.0}), region, params).verdict, Verdict::Fail);
}
