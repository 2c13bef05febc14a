#include "cascade/certify.hpp"

#include "cascade/errors.hpp"
#include "cascade/parallel.hpp"
#include "cascade/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cascade {

namespace {

using json = nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();
// Inner states this many integrator tolerances from 0_Y are treated as noise.
constexpr double kResolvedFactor = 100.0;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << (v == 0.0 ? 0.0 : v);
    return os.str();
}

json region_json(const RegionSpec& region) {
    json factors = json::array();
    for (std::size_t i = 0; i < region.dim(); ++i) {
        if (region.space().is_circle(i)) {
            factors.push_back("circle");
        } else {
            factors.push_back({region.bounds(i).lo, region.bounds(i).hi});
        }
    }
    return factors;
}

json basin_params_json(const BasinParams& p) {
    return {{"n", p.n}, {"horizon", p.horizon}, {"conv_tol", p.conv_tol}, {"tol", p.tol}, {"seed", p.seed}};
}

json eigen_json(const Eigenvalues& eigs) {
    json out = json::array();
    for (const auto& l : eigs) {
        out.push_back({l.real(), l.imag()});
    }
    return out;
}

// Decay rate of the upper envelope (suffix maximum) of a nonnegative signal,
// fitted by least squares on log values between hi and lo times its peak.
std::optional<double> fit_tail_rate(const std::vector<double>& times, const std::vector<double>& values,
                                    double hi = 1e-2, double lo = 1e-12) {
    const std::size_t n = values.size();
    if (n < 3) {
        return std::nullopt;
    }
    std::vector<double> suffix(n);
    double running = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        running = std::max(running, values[k]);
        suffix[k] = running;
    }
    const double peak = suffix.front();
    if (!(peak > 0.0)) {
        return std::nullopt;
    }
    auto regress = [&](double hi, double lo) -> std::optional<double> {
        double st = 0, sy = 0, stt = 0, sty = 0;
        std::size_t m = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (suffix[k] <= hi && suffix[k] >= lo && suffix[k] > 0.0) {
                const double y = std::log(suffix[k]);
                st += times[k];
                sy += y;
                stt += times[k] * times[k];
                sty += times[k] * y;
                ++m;
            }
        }
        if (m < 5) {
            return std::nullopt;
        }
        const double denom = static_cast<double>(m) * stt - st * st;
        if (!(std::abs(denom) > 0.0)) {
            return std::nullopt;
        }
        const double slope = (static_cast<double>(m) * sty - st * sy) / denom;
        return -slope;
    };
    if (auto r = regress(hi * peak, lo * peak)) {
        return r;
    }
    return regress(peak, 1e-300);
}

std::vector<double> inner_signal(const Trajectory& traj, const ScalarField& f) {
    std::vector<double> out;
    out.reserve(traj.size());
    for (const auto& p : traj.points) {
        out.push_back(f(p));
    }
    return out;
}

Trajectory slice_trajectory(const Trajectory& traj, Eigen::Index start, Eigen::Index count) {
    Trajectory out;
    out.times = traj.times;
    out.stats = traj.stats;
    out.points.reserve(traj.points.size());
    for (const auto& p : traj.points) {
        out.points.push_back(p.segment(start, count));
    }
    return out;
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "INCONCLUSIVE";
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "PASS") return Verdict::Pass;
    if (s == "FAIL") return Verdict::Fail;
    if (s == "INCONCLUSIVE") return Verdict::Inconclusive;
    throw InputError("unknown verdict '" + s + "'");
}

Verdict combine(const std::vector<Verdict>& verdicts) {
    bool inconclusive = false;
    for (Verdict v : verdicts) {
        if (v == Verdict::Fail) {
            return Verdict::Fail;
        }
        inconclusive = inconclusive || v == Verdict::Inconclusive;
    }
    return inconclusive ? Verdict::Inconclusive : Verdict::Pass;
}

double wilson_lower_bound(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) {
        return 0.0;
    }
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double center = p + z2 / (2.0 * n);
    const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return std::max(0.0, (center - spread) / (1.0 + z2 / n));
}

const ConditionEntry* CertificationReport::find(const std::string& id) const {
    for (const auto& c : conditions) {
        if (c.id == id) {
            return &c;
        }
    }
    return nullptr;
}

json point_json(const PointCoords& p) {
    json out = json::array();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        out.push_back(p[i]);
    }
    return out;
}

json to_json(const EquilibriumRecord& record) {
    return {{"point", point_json(record.point)},
            {"eigenvalues", eigen_json(record.eigenvalues)},
            {"classification", to_string(record.classification)},
            {"residual", record.residual}};
}

json to_json(const Witness& w) {
    return {{"x", point_json(w.x)}, {"y", point_json(w.y)}, {"lhs", w.lhs}, {"rhs", w.rhs}, {"violation", w.violation}};
}

json to_json(const BasinEstimate& b) {
    json witnesses = json::array();
    for (std::size_t k = 0; k < b.witnesses.size(); ++k) {
        witnesses.push_back({{"initial", point_json(b.witnesses[k])},
                             {"final", b.witness_diverged[k] ? json(nullptr) : point_json(b.witness_finals[k])},
                             {"diverged", static_cast<bool>(b.witness_diverged[k])}});
    }
    return {{"n_samples", b.n_samples},   {"n_converged", b.n_converged}, {"n_diverged", b.n_diverged},
            {"n_other", b.n_other},       {"fraction", b.fraction},       {"wilson_lower_95", b.wilson_lower},
            {"witnesses", witnesses}};
}

json to_json(const CertificationReport& report) {
    json conditions = json::array();
    for (const auto& c : report.conditions) {
        conditions.push_back({{"id", c.id},
                              {"title", c.title},
                              {"verdict", to_string(c.verdict)},
                              {"summary", c.summary},
                              {"evidence", c.evidence},
                              {"parameters", c.parameters},
                              {"witnesses", c.witnesses}});
    }
    return {{"schema_version", 1},
            {"system", report.system},
            {"evidence_grade", report.evidence_grade},
            {"overall", to_string(report.overall)},
            {"horizon", report.horizon},
            {"seed", report.seed},
            {"disclaimer", "PASS means verified on sampled evidence at the recorded parameters and finite horizon; "
                           "it is not a proof"},
            {"conditions", conditions}};
}

// ---------------------------------------------------------------------------

BasinEstimate monte_carlo_basin(const SystemDef& sys, const PointCoords& target, const RegionSpec& region,
                                const BasinParams& params) {
    if (params.n < 1) {
        throw PreconditionError("monte_carlo_basin: n must be at least 1");
    }
    if (region.dim() != sys.dim()) {
        throw InputError("monte_carlo_basin: region and system dimensions differ");
    }
    enum class Outcome : unsigned char { Converged, Diverged, Other };
    std::vector<Outcome> outcome(params.n, Outcome::Other);
    std::vector<PointCoords> starts(params.n);
    std::vector<PointCoords> finals(params.n);
    const PointCoords goal = canonicalize(sys.space(), target);

    FlowOptions options;
    options.tol = params.tol;
    options.record = Record::Final;

    parallel_for(params.n, params.threads, [&](std::size_t k) {
        Rng rng(params.seed, Stream::Basin, k);
        starts[k] = region.sample(rng);
        try {
            finals[k] = flow(sys, starts[k], params.horizon, options).final_point();
        } catch (const DivergenceError&) {
            outcome[k] = Outcome::Diverged;
            return;
        } catch (const NumericError&) {
            outcome[k] = Outcome::Diverged;
            return;
        }
        outcome[k] = dist(sys.space(), finals[k], goal) < params.conv_tol ? Outcome::Converged : Outcome::Other;
    });

    BasinEstimate est;
    est.n_samples = params.n;
    for (std::size_t k = 0; k < params.n; ++k) {
        switch (outcome[k]) {
            case Outcome::Converged: ++est.n_converged; continue;
            case Outcome::Diverged: ++est.n_diverged; break;
            case Outcome::Other: ++est.n_other; break;
        }
        if (est.witnesses.size() < params.max_witnesses) {
            est.witnesses.push_back(starts[k]);
            const bool diverged = outcome[k] == Outcome::Diverged;
            est.witness_finals.push_back(diverged ? PointCoords::Constant(starts[k].size(), std::nan(""))
                                                  : finals[k]);
            est.witness_diverged.push_back(diverged);
        }
    }
    est.fraction = static_cast<double>(est.n_converged) / static_cast<double>(est.n_samples);
    est.wilson_lower = wilson_lower_bound(est.n_converged, est.n_samples);
    return est;
}

ConditionEntry certify_inner_loop(const SystemDef& g, const PointCoords& eq0, const RegionSpec& region,
                                  const InnerLoopParams& params) {
    const double residual = g.eval(eq0).norm();
    if (!(residual < 1e-8)) {
        throw PreconditionError("certify_inner_loop: 0_Y is not an equilibrium (residual " + fmt(residual) + ")");
    }
    ConditionEntry entry;
    entry.id = "inner_loop";
    entry.title = "0_Y is a hyperbolic almost globally asymptotically stable equilibrium of y' = g(y)";
    entry.parameters = {{"region", region_json(region)},
                        {"basin", basin_params_json(params.basin)},
                        {"threshold", params.threshold},
                        {"hyperbolicity_tol", params.search.hyp_tol},
                        {"unstable_radius", params.unstable_radius}};

    const EquilibriumRecord rec = analyze_equilibrium(g, eq0, params.search.hyp_tol);
    entry.evidence["equilibrium"] = to_json(rec);
    if (!rec.classification.is_stable()) {
        entry.verdict = Verdict::Fail;
        entry.summary = "0_Y is " + to_string(rec.classification) + ", not a hyperbolic stable equilibrium";
        entry.witnesses.push_back({{"point", point_json(rec.point)}, {"eigenvalues", eigen_json(rec.eigenvalues)}});
        return entry;
    }

    std::vector<EquilibriumRecord> all = find_equilibria(g, region, params.search);
    entry.evidence["equilibria"] = json::array();
    for (const auto& e : all) {
        entry.evidence["equilibria"].push_back(to_json(e));
    }

    const BasinEstimate basin = monte_carlo_basin(g, rec.point, region, params.basin);
    entry.evidence["basin"] = to_json(basin);

    // Non-converged samples should be stuck near an unstable equilibrium,
    // i.e. on (a neighborhood of) its stable manifold.
    std::size_t unexplained = 0;
    for (std::size_t k = 0; k < basin.witnesses.size(); ++k) {
        if (basin.witness_diverged[k]) {
            continue;
        }
        const bool near_unstable = std::any_of(all.begin(), all.end(), [&](const EquilibriumRecord& e) {
            return e.classification.kind == Classification::Kind::Unstable &&
                   dist(g.space(), basin.witness_finals[k], e.point) < params.unstable_radius;
        });
        unexplained += near_unstable ? 0 : 1;
    }
    // Samples beyond the retained witnesses are not inspected individually.
    const std::size_t uninspected = basin.n_other + basin.n_diverged - basin.witnesses.size();
    entry.evidence["non_converged_unexplained"] = unexplained + uninspected;

    for (std::size_t k = 0; k < basin.witnesses.size(); ++k) {
        entry.witnesses.push_back({{"initial", point_json(basin.witnesses[k])},
                                   {"diverged", static_cast<bool>(basin.witness_diverged[k])}});
    }

    if (basin.n_diverged > 0) {
        entry.verdict = Verdict::Fail;
        entry.summary = std::to_string(basin.n_diverged) + " inner samples diverged";
    } else if (basin.fraction < params.threshold) {
        entry.verdict = Verdict::Fail;
        entry.summary = "basin fraction " + fmt(basin.fraction) + " below threshold " + fmt(params.threshold);
    } else if (unexplained + uninspected > 0) {
        entry.verdict = Verdict::Fail;
        entry.summary = std::to_string(unexplained + uninspected) +
                        " non-converged samples did not end near an unstable equilibrium";
    } else {
        entry.verdict = Verdict::Pass;
        entry.summary = "hyperbolic stable (" + to_string(rec.classification) + "); basin fraction " +
                        fmt(basin.fraction) + " (Wilson 95% lower bound " + fmt(basin.wilson_lower) + ")";
    }
    return entry;
}

ConditionEntry certify_unforced_outer(const CascadeDef& cas, const ScalarField& v, const RegionSpec& region,
                                      const UnforcedOuterParams& params) {
    const SystemDef sys = unforced_outer(cas);
    const RegionSpec chain_region = params.chain_region.value_or(region);
    ConditionEntry entry;
    entry.id = "unforced_outer";
    entry.title = "0_X is almost globally asymptotically stable for x' = f(x, 0_Y) and its chain recurrent set "
                  "consists of hyperbolic equilibria";

    const std::vector<EquilibriumRecord> eqs = find_equilibria(sys, region, params.search);
    json eq_json = json::array();
    for (const auto& e : eqs) {
        eq_json.push_back(to_json(e));
    }
    entry.evidence["equilibria"] = eq_json;

    std::vector<std::string> failures;
    std::vector<const EquilibriumRecord*> stable;
    for (const auto& e : eqs) {
        if (!e.classification.is_hyperbolic()) {
            failures.push_back("non-hyperbolic equilibrium at " + point_json(e.point).dump());
            entry.witnesses.push_back({{"point", point_json(e.point)}, {"reason", "non-hyperbolic"}});
        }
        if (e.classification.is_stable()) {
            stable.push_back(&e);
        }
    }
    if (stable.size() != 1) {
        failures.push_back(std::to_string(stable.size()) + " stable equilibria (need exactly one)");
    }

    const GradientLikeVerdict gl = verify_gradient_like(sys, v, eqs, chain_region, params.gradient);
    entry.evidence["gradient_like"] = {{"pass", gl.pass},
                                       {"trajectories", gl.trajectories},
                                       {"failures", gl.failures},
                                       {"slack", gl.slack},
                                       {"worst_step", gl.worst_step},
                                       {"message", gl.message}};
    if (gl.witness) {
        entry.evidence["gradient_like"]["witness"] = point_json(*gl.witness);
    }

    ChainRecurrenceParams chain = params.chain;
    const ChainRecurrenceResult cr = run_chain_recurrence(sys, chain_region, chain, eqs);
    const RecurrenceCheck check = check_R_equals_E(cr.approx, cr.cover, eqs);
    json rounds = json::array();
    for (const auto& r : cr.rounds) {
        rounds.push_back({{"depth", r.depth},
                          {"boxes", r.boxes},
                          {"recurrent", r.recurrent},
                          {"edges", r.edges},
                          {"eps", r.eps},
                          {"T", r.T},
                          {"recurrent_volume", r.recurrent_volume}});
    }
    entry.evidence["chain_recurrence"] = {{"rounds", rounds},
                                          {"pass", check.pass},
                                          {"margin", check.margin},
                                          {"worst_distance", check.worst_distance},
                                          {"far_boxes", check.far_boxes.size()},
                                          {"uncovered_equilibria", check.uncovered_equilibria.size()},
                                          {"message", check.message},
                                          {"statement", "recurrent at (eps, T) = (" + fmt(cr.approx.eps) + ", " +
                                                            fmt(cr.approx.T) + ")"}};
    if (!check.pass) {
        failures.push_back("chain recurrent approximation differs from the equilibria: " + check.message);
        for (std::size_t k = 0; k < std::min<std::size_t>(check.far_boxes.size(), 20); ++k) {
            entry.witnesses.push_back(
                {{"box_center", point_json(cr.cover.center(check.far_boxes[k]))}, {"reason", "recurrent box far from equilibria"}});
        }
    }

    if (stable.size() == 1) {
        const BasinEstimate basin = monte_carlo_basin(sys, stable.front()->point, region, params.basin);
        entry.evidence["basin"] = to_json(basin);
        entry.evidence["stable_equilibrium"] = point_json(stable.front()->point);
        if (basin.fraction < params.threshold) {
            failures.push_back("basin fraction " + fmt(basin.fraction) + " below threshold " + fmt(params.threshold));
        }
    }

    entry.parameters = {{"region", region_json(region)},
                        {"chain_region", region_json(chain_region)},
                        {"grid_per_dim", params.search.grid_per_dim},
                        {"newton_tol", params.search.newton_tol},
                        {"hyperbolicity_tol", params.search.hyp_tol},
                        {"chain_depth", chain.depth},
                        {"chain_rounds", chain.rounds},
                        {"chain_T", cr.approx.T},
                        {"chain_eps", cr.approx.eps},
                        {"chain_tol", chain.tol},
                        {"chain_seed", chain.seed},
                        {"gradient_n_traj", params.gradient.n_traj},
                        {"gradient_horizon", params.gradient.horizon},
                        {"gradient_tol", params.gradient.tol},
                        {"basin", basin_params_json(params.basin)},
                        {"threshold", params.threshold}};

    if (failures.empty()) {
        entry.verdict = Verdict::Pass;
        entry.summary = std::to_string(eqs.size()) + " hyperbolic equilibria, one stable; " + check.message;
    } else {
        entry.verdict = Verdict::Fail;
        entry.summary = failures.front();
        for (std::size_t k = 1; k < failures.size(); ++k) {
            entry.summary += "; " + failures[k];
        }
    }
    return entry;
}

QuotientEvidence difference_quotients(const CascadeDef& cas, const GrowthCertificate& cert, std::uint64_t seed) {
    QuotientEvidence q;
    const SpaceSpec& space = cas.inner_space();
    const PointCoords& y0 = cas.inner_equilibrium();
    q.vanishing = std::abs(cert.alpha(y0)) <= 1e-10 && std::abs(cert.beta(y0)) <= 1e-10;
    const Eigen::Index n = static_cast<Eigen::Index>(space.dim());
    constexpr int kDirections = 32;
    for (double r = 1e-2; r >= 1e-5 * 0.999; r /= 10.0) {
        double qa = 0.0;
        double qb = 0.0;
        for (int k = 0; k < kDirections; ++k) {
            Rng rng(seed, Stream::Quotient, static_cast<std::uint64_t>(k));
            TangentCoords dir(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                dir[i] = rng.uniform(-1.0, 1.0);
            }
            const double len = std::sqrt(dir.dot(space.metric() * dir));
            if (!(len > 0.0)) {
                continue;
            }
            const PointCoords y = canonicalize(space, y0 + (r / len) * dir);
            const double d = dist(space, y, y0);
            qa = std::max(qa, std::abs(cert.alpha(y)) / d);
            qb = std::max(qb, std::abs(cert.beta(y)) / d);
        }
        q.radii.push_back(r);
        q.alpha_quotients.push_back(qa);
        q.beta_quotients.push_back(qb);
    }
    q.bounded = true;
    for (std::size_t k = 1; k < q.radii.size(); ++k) {
        const bool a_ok = q.alpha_quotients[k] <= 2.0 * q.alpha_quotients[k - 1] + 1e-9;
        const bool b_ok = q.beta_quotients[k] <= 2.0 * q.beta_quotients[k - 1] + 1e-9;
        q.bounded = q.bounded && a_ok && b_ok && std::isfinite(q.alpha_quotients[k]) &&
                    std::isfinite(q.beta_quotients[k]);
    }
    return q;
}

ConditionEntry verify_growth_certificate(const CascadeDef& cas, const GrowthCertificate& cert,
                                         const GrowthParams& params) {
    ConditionEntry entry;
    entry.id = "growth_certificate";
    entry.title = "L_h W <= alpha(y) W(x) + beta(y) wherever W(x) >= c and y is in the inner basin";
    if (!params.region_x || !params.region_y) {
        throw PreconditionError("verify_growth_certificate: region_x and region_y are required");
    }
    RegionSpec region_x = *params.region_x;
    const RegionSpec& region_y = *params.region_y;

    const QuotientEvidence quotients = difference_quotients(cas, cert, params.seed);
    entry.evidence["alpha_beta_at_0Y"] = {{"alpha", cert.alpha(cas.inner_equilibrium())},
                                          {"beta", cert.beta(cas.inner_equilibrium())},
                                          {"vanishing", quotients.vanishing}};
    entry.evidence["difference_quotients"] = {{"radii", quotients.radii},
                                              {"alpha", quotients.alpha_quotients},
                                              {"beta", quotients.beta_quotients},
                                              {"bounded", quotients.bounded}};

    // Rejection sampling for {W >= c}, doubling line bounds on starvation.
    std::vector<PointCoords> xs;
    double min_w = kInf;
    int escalations = 0;
    std::size_t proposals_total = 0;
    for (;;) {
        xs.clear();
        std::size_t proposals = 0;
        Rng rng(params.seed, Stream::GrowthX, static_cast<std::uint64_t>(escalations));
        while (xs.size() < params.n_x && proposals < params.proposal_budget) {
            PointCoords x = region_x.sample(rng);
            ++proposals;
            const double w = cert.W(x);
            min_w = std::min(min_w, w);
            if (w >= cert.c) {
                xs.push_back(std::move(x));
            }
        }
        proposals_total += proposals;
        if (xs.size() >= params.n_x || escalations >= params.max_escalations) {
            break;
        }
        region_x = region_x.scaled(2.0);
        ++escalations;
    }

    // y samples: uniform in region_y, kept if they converge to 0_Y.
    std::vector<PointCoords> ys;
    std::size_t y_tried = 0;
    {
        const std::size_t budget = 20 * params.n_y + 100;
        FlowOptions options;
        options.tol = params.tol;
        options.record = Record::Final;
        const std::size_t batch = std::max<std::size_t>(params.n_y, 16);
        while (ys.size() < params.n_y && y_tried < budget) {
            std::vector<PointCoords> cand(batch);
            std::vector<char> ok(batch, 0);
            const std::size_t offset = y_tried;
            parallel_for(batch, params.threads, [&](std::size_t k) {
                Rng rng(params.seed, Stream::GrowthY, offset + k);
                cand[k] = region_y.sample(rng);
                try {
                    const PointCoords end = flow(cas.inner(), cand[k], params.inner_horizon, options).final_point();
                    ok[k] = dist(cas.inner_space(), end, cas.inner_equilibrium()) < params.inner_conv_tol ? 1 : 0;
                } catch (const Error&) {
                    ok[k] = 0;
                }
            });
            y_tried += batch;
            for (std::size_t k = 0; k < batch && ys.size() < params.n_y; ++k) {
                if (ok[k]) {
                    ys.push_back(cand[k]);
                }
            }
        }
    }

    entry.parameters = {{"n_x", params.n_x},
                        {"n_y", params.n_y},
                        {"c", cert.c},
                        {"region_x", region_json(*params.region_x)},
                        {"region_x_used", region_json(region_x)},
                        {"region_y", region_json(region_y)},
                        {"escalations", escalations},
                        {"proposal_budget", params.proposal_budget},
                        {"inner_horizon", params.inner_horizon},
                        {"inner_conv_tol", params.inner_conv_tol},
                        {"slack", params.slack},
                        {"seed", params.seed},
                        {"W", cert.W.name()},
                        {"alpha", cert.alpha.name()},
                        {"beta", cert.beta.name()}};
    entry.evidence["x_samples"] = xs.size();
    entry.evidence["x_proposals"] = proposals_total;
    entry.evidence["y_samples"] = ys.size();
    entry.evidence["y_tried"] = y_tried;
    entry.evidence["min_W_sampled"] = min_w;
    entry.evidence["basin_substitution"] =
        "y is drawn from samples observed to converge to 0_Y within the inner horizon, standing in for the basin";

    if (!quotients.vanishing) {
        entry.verdict = Verdict::Fail;
        entry.summary = "alpha or beta does not vanish at 0_Y";
        return entry;
    }
    if (min_w < -1e-12) {
        entry.verdict = Verdict::Fail;
        entry.summary = "W takes negative values (min " + fmt(min_w) + ")";
        return entry;
    }
    if (xs.size() < params.n_x) {
        entry.verdict = Verdict::Inconclusive;
        entry.summary = "sampler starvation: found " + std::to_string(xs.size()) + " of " + std::to_string(params.n_x) +
                        " points with W >= c after " + std::to_string(escalations) + " escalations";
        return entry;
    }
    if (ys.size() < params.n_y) {
        entry.verdict = Verdict::Inconclusive;
        entry.summary = "found only " + std::to_string(ys.size()) + " inner samples that converge to 0_Y";
        return entry;
    }

    // Evaluate every pair; keep the per-x worst in slot order.
    std::vector<Witness> worst(xs.size());
    parallel_for(xs.size(), params.threads, [&](std::size_t i) {
        const PointCoords& x = xs[i];
        const TangentCoords grad = cert.W.gradient(x);
        const double w = cert.W(x);
        const TangentCoords f0 = cas.outer_field(x, cas.inner_equilibrium());
        Witness best;
        best.violation = -kInf;
        for (const PointCoords& y : ys) {
            const TangentCoords h = cas.outer_field(x, y) - f0;
            const double lhs = grad.dot(h);
            const double rhs = cert.alpha(y) * w + cert.beta(y);
            const double violation = lhs - rhs;
            if (violation > best.violation) {
                best = {x, y, lhs, rhs, violation};
            }
        }
        worst[i] = std::move(best);
    });
    const auto it = std::max_element(worst.begin(), worst.end(),
                                     [](const Witness& a, const Witness& b) { return a.violation < b.violation; });
    const Witness& top = *it;
    std::size_t violating = 0;
    for (const auto& w : worst) {
        violating += w.violation > params.slack ? 1 : 0;
    }
    entry.evidence["pairs"] = xs.size() * ys.size();
    entry.evidence["max_violation"] = top.violation;
    entry.evidence["x_with_violation"] = violating;
    entry.witnesses.push_back(to_json(top));

    if (!quotients.bounded) {
        entry.verdict = Verdict::Fail;
        entry.summary = "difference quotients of alpha or beta grow toward 0_Y (not differentiable there)";
    } else if (top.violation > params.slack) {
        entry.verdict = Verdict::Fail;
        entry.summary = "inequality violated: max L_hW - (alpha W + beta) = " + fmt(top.violation) + " at " +
                        std::to_string(violating) + " sampled x";
    } else {
        entry.verdict = Verdict::Pass;
        entry.summary = "inequality holds at " + std::to_string(xs.size() * ys.size()) +
                        " sampled pairs; max violation " + fmt(top.violation);
    }
    return entry;
}

bool envelope_dominates(const Trajectory& inner_traj, const GrowthCertificate& cert, const DecayEnvelope& env) {
    for (std::size_t k = 0; k < inner_traj.size() && inner_traj.times[k] <= env.t_resolved; ++k) {
        const double decay = std::exp(-env.omega * inner_traj.times[k]);
        const double a = cert.alpha(inner_traj.points[k]);
        const double b = cert.beta(inner_traj.points[k]);
        if (a > env.A * decay * (1.0 + 1e-9) + 1e-300 || b > env.B * decay * (1.0 + 1e-9) + 1e-300) {
            return false;
        }
    }
    return true;
}

EnvelopeFit estimate_decay_envelope(const Trajectory& inner_traj, const GrowthCertificate& cert,
                                    const SpaceSpec& inner_space, const PointCoords& inner_equilibrium,
                                    double resolved_radius) {
    if (inner_traj.empty() || !(dist(inner_space, inner_traj.final_point(), inner_equilibrium) < 1e-6)) {
        throw PreconditionError("estimate_decay_envelope: trajectory does not converge to 0_Y (final dist >= 1e-6)");
    }
    const std::vector<double> alpha = inner_signal(inner_traj, cert.alpha);
    const std::vector<double> beta = inner_signal(inner_traj, cert.beta);
    std::vector<double> signal(alpha.size());
    for (std::size_t k = 0; k < signal.size(); ++k) {
        signal[k] = std::max(std::abs(alpha[k]), std::abs(beta[k]));
    }
    EnvelopeFit fit;
    std::optional<double> rate = fit_tail_rate(inner_traj.times, signal);
    if (!rate) {
        std::vector<double> d;
        for (const auto& p : inner_traj.points) {
            d.push_back(dist(inner_space, p, inner_equilibrium));
        }
        rate = fit_tail_rate(inner_traj.times, d);
    }
    fit.fitted_rate = rate.value_or(1.0);
    if (!(fit.fitted_rate > 0.0)) {
        fit.pass = false;
        fit.message = "fitted decay rate is not positive (" + fmt(fit.fitted_rate) + ")";
        fit.envelope = {0.0, 0.0, 1.0};
        return fit;
    }
    fit.envelope.omega = 0.5 * fit.fitted_rate;
    if (resolved_radius > 0.0) {
        std::size_t k = inner_traj.size();
        while (k > 0 && dist(inner_space, inner_traj.points[k - 1], inner_equilibrium) <= resolved_radius) --k;
        fit.envelope.t_resolved = k < inner_traj.size() ? inner_traj.times[k] : inner_traj.final_time();
    }
    for (std::size_t k = 0; k < inner_traj.size() && inner_traj.times[k] <= fit.envelope.t_resolved; ++k) {
        const double grow = std::exp(fit.envelope.omega * inner_traj.times[k]);
        fit.envelope.A = std::max(fit.envelope.A, alpha[k] * grow);
        fit.envelope.B = std::max(fit.envelope.B, beta[k] * grow);
    }
    fit.pass = envelope_dominates(inner_traj, cert, fit.envelope);
    fit.message = fit.pass ? "envelope dominates alpha and beta at all samples"
                           : "fitted envelope fails to dominate alpha or beta";
    return fit;
}

ComparisonResult comparison_bound_check(const CascadeDef& cas, const Trajectory& traj, const GrowthCertificate& cert,
                                        const DecayEnvelope& env) {
    ComparisonResult result;
    const auto nx = static_cast<Eigen::Index>(cas.outer_dim());
    const auto ny = static_cast<Eigen::Index>(cas.inner_dim());
    const Trajectory inner = slice_trajectory(traj, nx, ny);
    if (!(env.omega > 0.0) || !envelope_dominates(inner, cert, env)) {
        result.envelope_failed = true;
        result.message = "envelope does not dominate alpha, beta along the inner trajectory";
        return result;
    }
    std::optional<std::size_t> first;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (cert.W(traj.points[k].head(nx)) >= cert.c) {
            first = k;
            break;
        }
    }
    if (!first) {
        result.pass = true;
        result.vacuous = true;
        result.message = "W stays below c; bound holds vacuously";
        return result;
    }
    result.t1 = traj.times[*first];
    const double w1 = cert.W(traj.points[*first].head(nx));
    result.log_bound = env.A / env.omega + std::log(std::max(cert.c, w1) + env.B / env.omega);
    result.bound = std::exp(result.log_bound);
    for (std::size_t k = *first; k < traj.size(); ++k) {
        result.max_w = std::max(result.max_w, cert.W(traj.points[k].head(nx)));
    }
    result.margin = result.bound - result.max_w;
    result.log_margin = result.max_w > 0.0 ? result.log_bound - std::log(result.max_w) : kInf;
    result.pass = result.max_w <= result.bound;
    result.message = result.pass ? "comparison bound holds" : "W exceeded the comparison bound";
    return result;
}

CertificationReport certify_cascade(const CascadeDef& cas, const ScalarField& v_outer, const GrowthCertificate& cert,
                                    const CascadeCertifyParams& params) {
    CertificationReport report;
    report.system = cas.name();
    report.seed = params.seed;
    report.horizon = std::max({params.inner.basin.horizon, params.outer.basin.horizon, params.comparison_horizon,
                               params.cascade_basin.horizon});

    // 1. Inner loop.
    report.conditions.push_back(certify_inner_loop(cas.inner(), cas.inner_equilibrium(), params.inner_region, params.inner));

    // 2. Unforced outer loop.
    report.conditions.push_back(certify_unforced_outer(cas, v_outer, params.outer_region, params.outer));

    // 3. Growth certificate.
    GrowthParams growth = params.growth;
    if (!growth.region_x) growth.region_x = params.outer_region;
    if (!growth.region_y) growth.region_y = params.inner_region;
    report.conditions.push_back(verify_growth_certificate(cas, cert, growth));

    // 4. Decay envelope + comparison bound along sampled cascade trajectories.
    {
        ConditionEntry entry;
        entry.id = "comparison_bound";
        entry.title = "alpha, beta decay exponentially along inner trajectories and W(x(t)) obeys the comparison bound";
        const SystemDef full = cas.full_system();
        std::vector<PointCoords> starts = params.regression_points;
        for (std::size_t k = 0; k < params.comparison_trajectories; ++k) {
            Rng rng(params.seed, Stream::Comparison, k);
            const PointCoords x = params.outer_region.sample(rng);
            const PointCoords y = params.inner_region.sample(rng);
            starts.push_back(cas.join(x, y));
        }
        struct Row {
            bool ran = false;
            bool inner_converged = false;
            EnvelopeFit fit;
            ComparisonResult cmp;
            std::string error;
        };
        std::vector<Row> rows(starts.size());
        FlowOptions options;
        options.tol = params.growth.tol;
        options.record = Record::Grid;
        options.sample_dt = params.comparison_sample_dt;
        const auto nx = static_cast<Eigen::Index>(cas.outer_dim());
        const auto ny = static_cast<Eigen::Index>(cas.inner_dim());
        parallel_for(starts.size(), params.threads, [&](std::size_t k) {
            Row& row = rows[k];
            Trajectory traj;
            try {
                traj = flow(full, starts[k], params.comparison_horizon, options);
            } catch (const DivergenceError& e) {
                row.error = e.what();
                return;
            }
            row.ran = true;
            const Trajectory inner = slice_trajectory(traj, nx, ny);
            row.inner_converged =
                dist(cas.inner_space(), inner.final_point(), cas.inner_equilibrium()) < 1e-6;
            if (!row.inner_converged) {
                return;
            }
            row.fit = estimate_decay_envelope(inner, cert, cas.inner_space(), cas.inner_equilibrium(),
                                              kResolvedFactor * params.growth.tol);
            row.cmp = comparison_bound_check(cas, traj, cert, row.fit.envelope);
        });
        std::size_t checked = 0, diverged = 0, skipped = 0, envelope_fail = 0, bound_fail = 0, vacuous = 0;
        double worst_margin = kInf;
        double worst_log_margin = kInf;
        std::size_t overflowed = 0;
        double min_rate = kInf;
        json rows_json = json::array();
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const Row& row = rows[k];
            if (!row.ran) {
                ++diverged;
                entry.witnesses.push_back({{"initial", point_json(starts[k])}, {"reason", "cascade trajectory diverged"}});
                continue;
            }
            if (!row.inner_converged) {
                ++skipped;
                continue;
            }
            ++checked;
            envelope_fail += row.fit.pass ? 0 : 1;
            bound_fail += (!row.cmp.pass && !row.cmp.envelope_failed) ? 1 : 0;
            envelope_fail += row.cmp.envelope_failed ? 1 : 0;
            vacuous += row.cmp.vacuous ? 1 : 0;
            min_rate = std::min(min_rate, row.fit.fitted_rate);
            if (!row.cmp.vacuous && row.cmp.pass) {
                worst_margin = std::min(worst_margin, row.cmp.margin);
                worst_log_margin = std::min(worst_log_margin, row.cmp.log_margin);
                overflowed += std::isfinite(row.cmp.bound) ? 0 : 1;
            }
            rows_json.push_back({{"initial", point_json(starts[k])},
                                 {"A", row.fit.envelope.A},
                                 {"B", row.fit.envelope.B},
                                 {"omega", row.fit.envelope.omega},
                                 {"t_resolved", row.fit.envelope.t_resolved},
                                 {"fitted_rate", row.fit.fitted_rate},
                                 {"t1", row.cmp.t1},
                                 {"bound", row.cmp.bound},
                                 {"max_W", row.cmp.max_w},
                                 {"margin", row.cmp.margin},
                                 {"log_bound", row.cmp.log_bound},
                                 {"log_margin", row.cmp.log_margin},
                                 {"vacuous", row.cmp.vacuous},
                                 {"pass", row.cmp.pass}});
            if (!row.cmp.pass) {
                entry.witnesses.push_back({{"initial", point_json(starts[k])}, {"reason", row.cmp.message}});
            }
        }
        entry.evidence = {{"trajectories", starts.size()},
                          {"checked", checked},
                          {"diverged", diverged},
                          {"inner_not_converged", skipped},
                          {"envelope_failures", envelope_fail},
                          {"bound_failures", bound_fail},
                          {"vacuous", vacuous},
                          {"worst_margin", std::isfinite(worst_margin) ? json(worst_margin) : json(nullptr)},
                          {"worst_log_margin", std::isfinite(worst_log_margin) ? json(worst_log_margin) : json(nullptr)},
                          {"bound_overflows_double", overflowed},
                          {"min_fitted_rate", std::isfinite(min_rate) ? json(min_rate) : json(nullptr)},
                          {"rows", rows_json}};
        entry.parameters = {{"random_trajectories", params.comparison_trajectories},
                            {"regression_points", params.regression_points.size()},
                            {"horizon", params.comparison_horizon},
                            {"sample_dt", params.comparison_sample_dt},
                            {"tol", params.growth.tol},
                            {"omega_safety_factor", 0.5},
                            {"resolved_radius", kResolvedFactor * params.growth.tol},
                            {"seed", params.seed}};
        if (diverged > 0) {
            entry.verdict = Verdict::Fail;
            entry.summary = std::to_string(diverged) + " cascade trajectories diverged";
        } else if (envelope_fail > 0 || bound_fail > 0) {
            entry.verdict = Verdict::Fail;
            entry.summary = std::to_string(envelope_fail) + " envelope failures, " + std::to_string(bound_fail) +
                            " comparison-bound failures";
        } else if (checked == 0) {
            entry.verdict = Verdict::Inconclusive;
            entry.summary = "no trajectory with a converged inner loop to check";
        } else {
            entry.verdict = Verdict::Pass;
            entry.summary = "bound holds on " + std::to_string(checked) + " trajectories (" + std::to_string(vacuous) +
                            " vacuous); worst margin " + (std::isfinite(worst_margin) ? fmt(worst_margin) : "n/a") +
                            ", worst log margin " + (std::isfinite(worst_log_margin) ? fmt(worst_log_margin) : "n/a") +
                            "; " + std::to_string(overflowed) + " bounds exceed double range";
        }
        report.conditions.push_back(std::move(entry));
    }

    // 5. Full cascade: block structure at slice equilibria, local rate, basin.
    {
        ConditionEntry entry;
        entry.id = "cascade_stability";
        entry.title = "(0_X, 0_Y) is locally exponentially stable and attracts almost all sampled initial conditions";
        const SystemDef outer_sys = unforced_outer(cas);
        const std::vector<EquilibriumRecord> outer_eqs = find_equilibria(outer_sys, params.outer_region, params.outer.search);
        std::vector<std::string> failures;
        json blocks = json::array();
        std::optional<PointCoords> outer_target;
        for (const auto& e : outer_eqs) {
            const PointCoords z = cas.join(e.point, cas.inner_equilibrium());
            const BlockStructureReport b = cascade_block_structure(cas, z, params.outer.search.hyp_tol);
            blocks.push_back({{"point", point_json(z)},
                              {"ok", b.ok},
                              {"lower_left_norm", b.lower_left_norm},
                              {"max_pairing_error", b.max_pairing_error},
                              {"eigenvalues", eigen_json(b.full)},
                              {"classification", to_string(b.classification)}});
            if (!b.ok) {
                failures.push_back("block structure violated at " + point_json(z).dump() + ": " + b.message);
            }
            if (e.classification.is_stable()) {
                outer_target = outer_target ? outer_target : std::optional<PointCoords>(e.point);
            }
        }
        entry.evidence["block_structure"] = blocks;

        if (!outer_target) {
            entry.verdict = Verdict::Inconclusive;
            entry.summary = "unforced outer loop has no stable equilibrium to target";
            report.conditions.push_back(std::move(entry));
        } else {
            const SystemDef full = cas.full_system();
            const PointCoords target = cas.join(*outer_target, cas.inner_equilibrium());
            entry.evidence["target"] = point_json(target);
            const EquilibriumRecord rec = analyze_equilibrium(full, target, params.outer.search.hyp_tol);
            double slowest = kInf;
            for (const auto& l : rec.eigenvalues) {
                slowest = std::min(slowest, std::abs(l.real()));
            }
            entry.evidence["target_eigenvalues"] = eigen_json(rec.eigenvalues);
            entry.evidence["target_classification"] = to_string(rec.classification);
            if (!rec.classification.is_stable()) {
                failures.push_back("target is " + to_string(rec.classification));
            }

            // Local exponential decay from small perturbations.
            constexpr std::size_t kPerturbations = 8;
            std::vector<double> rates(kPerturbations, 0.0);
            FlowOptions local;
            local.tol = 1e-12;
            local.record = Record::Grid;
            local.sample_dt = 0.1;
            const Eigen::Index n = static_cast<Eigen::Index>(full.dim());
            parallel_for(kPerturbations, params.threads, [&](std::size_t k) {
                Rng rng(params.seed, Stream::Perturbation, k);
                TangentCoords dir(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    dir[i] = rng.uniform(-1.0, 1.0);
                }
                dir *= params.perturbation / std::sqrt(dir.dot(full.space().metric() * dir));
                try {
                    const Trajectory traj = flow(full, target + dir, 20.0 / std::max(slowest, 0.1), local);
                    std::vector<double> d;
                    for (const auto& p : traj.points) {
                        d.push_back(dist(full.space(), p, target));
                    }
                    // Stay well above the integrator's absolute tolerance.
                    rates[k] = fit_tail_rate(traj.times, d, 1e-1, 1e-6).value_or(0.0);
                } catch (const Error&) {
                    rates[k] = 0.0;
                }
            });
            const double min_rate = *std::min_element(rates.begin(), rates.end());
            const double required = (1.0 - params.rate_slack) * slowest;
            entry.evidence["local_rate"] = {{"min_fitted_rate", min_rate},
                                            {"required", required},
                                            {"slowest_linear_rate", slowest},
                                            {"perturbation", params.perturbation}};
            if (!(min_rate >= required)) {
                failures.push_back("local decay rate " + fmt(min_rate) + " below required " + fmt(required));
            }

            const RegionSpec cascade_region(SpaceSpec::product(params.outer_region.space(), params.inner_region.space()),
                                            [&] {
                                                std::vector<Interval> b = params.outer_region.line_bounds();
                                                const auto inner_b = params.inner_region.line_bounds();
                                                b.insert(b.end(), inner_b.begin(), inner_b.end());
                                                return b;
                                            }());
            const BasinEstimate basin = monte_carlo_basin(full, target, cascade_region, params.cascade_basin);
            entry.evidence["basin"] = to_json(basin);
            for (std::size_t k = 0; k < basin.witnesses.size(); ++k) {
                entry.witnesses.push_back({{"initial", point_json(basin.witnesses[k])},
                                           {"diverged", static_cast<bool>(basin.witness_diverged[k])}});
            }
            if (basin.n_diverged > 0) {
                failures.push_back(std::to_string(basin.n_diverged) + " cascade samples diverged");
            }
            if (basin.fraction < params.cascade_threshold) {
                failures.push_back("cascade basin fraction " + fmt(basin.fraction) + " below threshold " +
                                   fmt(params.cascade_threshold));
            }
            entry.parameters = {{"basin", basin_params_json(params.cascade_basin)},
                                {"threshold", params.cascade_threshold},
                                {"region", region_json(cascade_region)},
                                {"perturbation", params.perturbation},
                                {"rate_slack", params.rate_slack}};
            if (failures.empty()) {
                entry.verdict = Verdict::Pass;
                entry.summary = "block-triangular spectra at " + std::to_string(outer_eqs.size()) +
                                " slice equilibria; local rate " + fmt(min_rate) + "; basin fraction " +
                                fmt(basin.fraction) + " (Wilson 95% lower bound " + fmt(basin.wilson_lower) + ")";
            } else {
                entry.verdict = Verdict::Fail;
                entry.summary = failures.front();
                for (std::size_t k = 1; k < failures.size(); ++k) {
                    entry.summary += "; " + failures[k];
                }
            }
            report.conditions.push_back(std::move(entry));
        }
    }

    std::vector<Verdict> verdicts;
    for (const auto& c : report.conditions) {
        verdicts.push_back(c.verdict);
    }
    report.overall = combine(verdicts);
    return report;
}

}  // namespace cascade
