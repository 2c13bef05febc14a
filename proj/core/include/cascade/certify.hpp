#pragma once

// Sampled evidence for the stability conditions of a cascade.
//
// Every verdict here means "verified on sampled evidence at the recorded
// parameters". Nothing in this module is a proof; reports say so through
// their evidence_grade field.

#include "cascade/chainrec.hpp"
#include "cascade/dynamics.hpp"
#include "cascade/equilibria.hpp"
#include "cascade/flow.hpp"
#include "cascade/region.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cascade {

enum class Verdict { Pass, Fail, Inconclusive };

[[nodiscard]] std::string to_string(Verdict v);
[[nodiscard]] Verdict verdict_from_string(const std::string& s);

/// FAIL if any input is FAIL, otherwise INCONCLUSIVE if any is, otherwise PASS.
[[nodiscard]] Verdict combine(const std::vector<Verdict>& verdicts);

/// Lower end of the 95% Wilson score interval for k successes in n trials.
[[nodiscard]] double wilson_lower_bound(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

// ---------------------------------------------------------------------------
// Monte Carlo basin estimation

struct BasinParams {
    std::size_t n = 10'000;
    double horizon = 100.0;
    double conv_tol = 1e-3;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::size_t max_witnesses = 100;
};

struct BasinEstimate {
    std::size_t n_samples = 0;
    std::size_t n_converged = 0;
    std::size_t n_diverged = 0;
    std::size_t n_other = 0;
    double fraction = 0.0;
    double wilson_lower = 0.0;
    std::vector<PointCoords> witnesses;      ///< initial points that did not converge, by sample index
    std::vector<PointCoords> witness_finals; ///< their final points (diverged: last point unknown, NaN)
    std::vector<bool> witness_diverged;
};

/// Uniform samples in region flowed to the horizon; a sample converges when
/// its final point is within conv_tol of target. Sample k depends only on
/// (seed, k), so larger n extends the sample set. Divergence is counted.
[[nodiscard]] BasinEstimate monte_carlo_basin(const SystemDef& sys, const PointCoords& target, const RegionSpec& region,
                                              const BasinParams& params);

// ---------------------------------------------------------------------------
// Growth certificates and the precompactness argument

struct GrowthCertificate {
    ScalarField W;      ///< proper Lyapunov candidate on X
    ScalarField alpha;  ///< on Y
    ScalarField beta;   ///< on Y
    double c = 0.0;     ///< inequality is required where W(x) >= c
};

struct DecayEnvelope {
    double A = 0.0;
    double B = 0.0;
    double omega = 1.0;
    /// Samples after this time are not constrained: the inner state sits
    /// inside the integrator's noise floor around 0_Y from then on.
    double t_resolved = std::numeric_limits<double>::infinity();
};

struct Witness {
    PointCoords x;
    PointCoords y;
    double lhs = 0.0;   ///< L_h W(x, y)
    double rhs = 0.0;   ///< alpha(y) W(x) + beta(y)
    double violation = 0.0;
};

struct ConditionEntry {
    std::string id;
    std::string title;
    Verdict verdict = Verdict::Inconclusive;
    std::string summary;
    nlohmann::json evidence = nlohmann::json::object();
    nlohmann::json parameters = nlohmann::json::object();
    nlohmann::json witnesses = nlohmann::json::array();
};

struct CertificationReport {
    std::string system;
    std::string evidence_grade = "sampled";
    Verdict overall = Verdict::Inconclusive;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::vector<ConditionEntry> conditions;

    [[nodiscard]] const ConditionEntry* find(const std::string& id) const;
};

[[nodiscard]] nlohmann::json to_json(const CertificationReport& report);
[[nodiscard]] nlohmann::json to_json(const BasinEstimate& basin);
[[nodiscard]] nlohmann::json to_json(const EquilibriumRecord& record);
[[nodiscard]] nlohmann::json to_json(const Witness& witness);
[[nodiscard]] nlohmann::json point_json(const PointCoords& p);

struct InnerLoopParams {
    BasinParams basin;
    double threshold = 0.999;
    double unstable_radius = 1e-2;  ///< non-converged samples must end this close to an unstable equilibrium
    EquilibriumSearch search;
};

/// Hyperbolic stability of eq0 for the inner system plus a Monte Carlo basin
/// estimate over region. Throws PreconditionError if eq0 is not an equilibrium.
[[nodiscard]] ConditionEntry certify_inner_loop(const SystemDef& g, const PointCoords& eq0, const RegionSpec& region,
                                                const InnerLoopParams& params);

struct UnforcedOuterParams {
    EquilibriumSearch search;
    ChainRecurrenceParams chain;
    std::optional<RegionSpec> chain_region;  ///< defaults to the search region
    GradientLikeParams gradient;
    BasinParams basin;
    double threshold = 0.999;
};

/// Equilibria of x' = f(x, 0_Y) all hyperbolic with exactly one stable;
/// chain recurrent approximation equal to the equilibria; basin of the stable
/// one. The gradient-like check against V is reported alongside.
[[nodiscard]] ConditionEntry certify_unforced_outer(const CascadeDef& cas, const ScalarField& v, const RegionSpec& region,
                                                    const UnforcedOuterParams& params);

struct GrowthParams {
    std::size_t n_x = 400;
    std::size_t n_y = 250;
    std::optional<RegionSpec> region_x;
    std::optional<RegionSpec> region_y;
    std::size_t proposal_budget = 1'000'000;
    int max_escalations = 3;
    double inner_horizon = 100.0;  ///< y samples must converge to 0_Y within this time
    double inner_conv_tol = 1e-3;
    double tol = 1e-8;
    double slack = 1e-9;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct QuotientEvidence {
    std::vector<double> radii;
    std::vector<double> alpha_quotients;  ///< max alpha(y) / dist(y, 0_Y) at each radius
    std::vector<double> beta_quotients;
    bool vanishing = false;
    bool bounded = false;
};

/// Difference quotients of alpha and beta toward 0_Y over radii 1e-2..1e-5.
[[nodiscard]] QuotientEvidence difference_quotients(const CascadeDef& cas, const GrowthCertificate& cert,
                                                    std::uint64_t seed);

/// Samples x with W(x) >= c and y from the empirical inner basin and checks
/// L_h W <= alpha W + beta + slack at every pair.
[[nodiscard]] ConditionEntry verify_growth_certificate(const CascadeDef& cas, const GrowthCertificate& cert,
                                                       const GrowthParams& params);

struct EnvelopeFit {
    DecayEnvelope envelope;
    double fitted_rate = 0.0;  ///< tail decay rate of the fitted signal
    bool pass = false;
    std::string message;
};

/// Fits a decay rate to the tail of max(alpha, beta) along an inner
/// trajectory (or of dist(y, 0_Y) when both vanish identically), halves it,
/// and sets A, B to the smallest constants that dominate the samples.
/// Once the trajectory stays within resolved_radius of 0_Y its samples are
/// integration noise and are left out (t_resolved).
/// Throws PreconditionError unless the trajectory ends within 1e-6 of 0_Y.
[[nodiscard]] EnvelopeFit estimate_decay_envelope(const Trajectory& inner_traj, const GrowthCertificate& cert,
                                                  const SpaceSpec& inner_space, const PointCoords& inner_equilibrium,
                                                  double resolved_radius = 0.0);

/// True iff alpha(y(t)) <= A e^{-omega t} and beta(y(t)) <= B e^{-omega t} at
/// every sample up to t_resolved (relative slack 1e-9).
[[nodiscard]] bool envelope_dominates(const Trajectory& inner_traj, const GrowthCertificate& cert,
                                      const DecayEnvelope& env);

struct ComparisonResult {
    bool pass = false;
    bool vacuous = false;       ///< W never reached c
    bool envelope_failed = false;
    double t1 = 0.0;
    double bound = 0.0;
    double max_w = 0.0;
    double margin = 0.0;        ///< bound - max W after t1
    double log_bound = 0.0;     ///< log of the bound; finite even when the bound overflows
    double log_margin = 0.0;    ///< log_bound - log(max W)
    std::string message;
};

/// W(x(t)) <= e^{A/omega} (max{c, W(x(t1))} + B/omega) for t >= t1, the first
/// time W >= c. `traj` is a full cascade trajectory. An envelope that fails
/// to dominate alpha, beta along the inner part is reported as such.
[[nodiscard]] ComparisonResult comparison_bound_check(const CascadeDef& cas, const Trajectory& traj,
                                                      const GrowthCertificate& cert, const DecayEnvelope& env);

struct CascadeCertifyParams {
    RegionSpec inner_region;
    RegionSpec outer_region;
    InnerLoopParams inner;
    UnforcedOuterParams outer;
    GrowthParams growth;
    std::size_t comparison_trajectories = 20;
    double comparison_horizon = 200.0;
    double comparison_sample_dt = 0.05;
    std::vector<PointCoords> regression_points;  ///< extra full-state initial conditions
    BasinParams cascade_basin;
    double cascade_threshold = 0.99;
    double perturbation = 1e-3;
    double rate_slack = 0.2;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

/// Runs the five condition checks and assembles the report:
///   inner_loop, unforced_outer, growth_certificate, comparison_bound,
///   cascade_stability.
[[nodiscard]] CertificationReport certify_cascade(const CascadeDef& cas, const ScalarField& v_outer,
                                                  const GrowthCertificate& cert, const CascadeCertifyParams& params);

}  // namespace cascade
