#pragma once

// JSON run configuration. Only schema_version is required; the system may
// also come from the command line. Absent values fall back to the selected
// system's defaults.

#include <cascade/region.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cascade::cli {

inline constexpr int kSchemaVersion = 1;

using Bounds = std::vector<Interval>;  ///< one [lo, hi] per line factor

/// Inline vector field: one expression per coordinate over `variables`.
struct FieldDef {
    std::vector<std::string> variables;
    std::vector<std::string> factors;            ///< "circle" | "line"
    std::optional<std::vector<double>> metric;   ///< row-major, identity if absent
    std::vector<std::string> field;
    std::optional<std::vector<double>> equilibrium;  ///< inner loop of a cascade only

    friend bool operator==(const FieldDef&, const FieldDef&) = default;
};

/// Either `system` (plain) or `outer` + `inner` (cascade). Outer field
/// expressions may read the inner variables.
struct InlineSystem {
    std::string name;
    std::optional<FieldDef> system;
    std::optional<FieldDef> outer;
    std::optional<FieldDef> inner;
    std::optional<std::string> lyapunov;  ///< V over the (outer) variables
    std::optional<Bounds> region;         ///< full state

    [[nodiscard]] bool is_cascade() const noexcept { return outer.has_value(); }
    friend bool operator==(const InlineSystem&, const InlineSystem&) = default;
};

struct SearchKeys {
    std::optional<int> grid_per_dim;
    std::optional<double> newton_tol;
    std::optional<int> max_iterations;
    std::optional<double> hyperbolicity_tol;
    friend bool operator==(const SearchKeys&, const SearchKeys&) = default;
};

struct ChainKeys {
    std::optional<int> depth;
    std::optional<int> rounds;
    std::optional<double> T;
    std::optional<double> epsilon;
    std::optional<std::size_t> samples_per_box;
    std::optional<double> tol;
    friend bool operator==(const ChainKeys&, const ChainKeys&) = default;
};

struct SampleKeys {
    std::optional<std::size_t> n;
    std::optional<double> horizon;
    std::optional<double> conv_tol;
    std::optional<double> tol;
    std::optional<double> threshold;
    friend bool operator==(const SampleKeys&, const SampleKeys&) = default;
};

struct SimulateBlock {
    std::optional<std::string> subsystem;  ///< "full" | "outer" | "inner"
    std::optional<std::vector<std::vector<double>>> from;
    std::optional<double> t;
    std::optional<double> tol;
    std::optional<double> sample_dt;
    std::optional<std::string> record;  ///< "steps" | "grid" | "final"
    std::optional<std::vector<int>> plot_axes;
    friend bool operator==(const SimulateBlock&, const SimulateBlock&) = default;
};

struct EquilibriaBlock {
    std::optional<std::string> subsystem;
    std::optional<Bounds> region;
    SearchKeys search;
    friend bool operator==(const EquilibriaBlock&, const EquilibriaBlock&) = default;
};

struct ChainrecBlock {
    std::optional<std::string> subsystem;
    std::optional<Bounds> region;
    ChainKeys chain;
    SearchKeys search;
    std::optional<std::vector<int>> plot_axes;
    friend bool operator==(const ChainrecBlock&, const ChainrecBlock&) = default;
};

struct BasinBlock {
    std::optional<std::string> subsystem;
    std::optional<Bounds> region;
    std::optional<std::vector<double>> target;
    SampleKeys sample;
    std::optional<std::size_t> max_witnesses;
    friend bool operator==(const BasinBlock&, const BasinBlock&) = default;
};

struct CertificateDef {
    std::optional<std::string> W;
    std::optional<std::string> alpha;
    std::optional<std::string> beta;
    std::optional<double> c;
    friend bool operator==(const CertificateDef&, const CertificateDef&) = default;
};

struct GradientKeys {
    std::optional<std::size_t> n_traj;
    std::optional<double> horizon;
    std::optional<double> tol;
    friend bool operator==(const GradientKeys&, const GradientKeys&) = default;
};

struct GrowthKeys {
    std::optional<std::size_t> n_x;
    std::optional<std::size_t> n_y;
    std::optional<std::size_t> proposal_budget;
    std::optional<int> max_escalations;
    std::optional<double> inner_horizon;
    std::optional<double> slack;
    std::optional<double> tol;
    friend bool operator==(const GrowthKeys&, const GrowthKeys&) = default;
};

struct ComparisonKeys {
    std::optional<std::size_t> trajectories;
    std::optional<double> horizon;
    std::optional<double> sample_dt;
    std::optional<bool> regression_points;
    friend bool operator==(const ComparisonKeys&, const ComparisonKeys&) = default;
};

struct CertifyBlock {
    std::optional<Bounds> inner_region;
    std::optional<Bounds> outer_region;
    std::optional<Bounds> chain_region;
    std::optional<CertificateDef> certificate;
    std::optional<SearchKeys> equilibria;
    std::optional<ChainKeys> chain;
    std::optional<GradientKeys> gradient;
    std::optional<SampleKeys> inner_basin;
    std::optional<SampleKeys> outer_basin;
    std::optional<SampleKeys> cascade_basin;
    std::optional<GrowthKeys> growth;
    std::optional<ComparisonKeys> comparison;
    std::optional<double> perturbation;
    std::optional<double> rate_slack;
    std::optional<bool> witnesses_csv;
    friend bool operator==(const CertifyBlock&, const CertifyBlock&) = default;
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    std::optional<std::string> system_name;    ///< built-in
    std::optional<InlineSystem> system_inline;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<unsigned> threads;

    std::optional<SimulateBlock> simulate;
    std::optional<EquilibriaBlock> equilibria;
    std::optional<ChainrecBlock> chainrec;
    std::optional<BasinBlock> basin;
    std::optional<CertifyBlock> certify;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ConfigError naming the JSON path of the first problem, e.g.
/// `$.chainrec.epsilonn: unknown key`.
[[nodiscard]] RunConfig parse_config(const nlohmann::json& doc);
[[nodiscard]] RunConfig parse_config_text(const std::string& text);

[[nodiscard]] nlohmann::json serialize(const RunConfig& cfg);

}  // namespace cascade::cli
