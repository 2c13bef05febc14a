#pragma once

// Named systems the CLI can run without an inline definition.

#include <cascade/certify.hpp>
#include <cascade/dynamics.hpp>
#include <cascade/region.hpp>

#include <optional>
#include <string>
#include <vector>

namespace cascade::cli {

/// A resolved system: either a plain SystemDef or a cascade, plus the
/// defaults the commands fall back on.
struct Problem {
    std::string name;
    std::string description;
    std::vector<std::string> variables;  ///< coordinate names of the full state

    std::optional<SystemDef> system;
    std::optional<CascadeDef> cascade;

    std::optional<ScalarField> lyapunov;  ///< V for the (unforced outer) gradient-like check
    std::optional<GrowthCertificate> certificate;

    RegionSpec region;                       ///< full state
    std::optional<RegionSpec> outer_region;  ///< cascades only
    std::optional<RegionSpec> inner_region;
    std::optional<RegionSpec> chain_region;  ///< for chain recurrence on the (outer) system
    PointCoords target;                      ///< full-state attractor
    std::vector<PointCoords> regression_points;

    [[nodiscard]] bool is_cascade() const noexcept { return cascade.has_value(); }
    /// The full system (cascade flattened).
    [[nodiscard]] SystemDef full() const;
};

[[nodiscard]] const std::vector<std::string>& builtin_names();

/// Throws InputError for an unknown name.
[[nodiscard]] Problem make_builtin(const std::string& name);

/// Regression initial conditions for paper-example, ordered
/// (theta, thetadot, phi, phidot).
[[nodiscard]] std::vector<PointCoords> example_regression_points();

}  // namespace cascade::cli
