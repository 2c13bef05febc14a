#pragma once

// Equilibrium search, linearization and hyperbolicity classification.

#include "cascade/dynamics.hpp"
#include "cascade/region.hpp"

#include <complex>
#include <string>
#include <vector>

namespace cascade {

using Eigenvalues = std::vector<std::complex<double>>;

inline constexpr double kDefaultHyperbolicityTol = 1e-6;
inline constexpr double kDedupRadius = 1e-4;

struct Classification {
    enum class Kind { Stable, Unstable, NonHyperbolic };
    Kind kind = Kind::NonHyperbolic;
    int unstable_count = 0;  ///< eigenvalues with Re > hyp_tol (Unstable only)

    [[nodiscard]] bool is_stable() const noexcept { return kind == Kind::Stable; }
    [[nodiscard]] bool is_hyperbolic() const noexcept { return kind != Kind::NonHyperbolic; }
    friend bool operator==(const Classification&, const Classification&) = default;
};

/// "Stable", "Unstable(k)" or "NonHyperbolic".
[[nodiscard]] std::string to_string(const Classification& c);

struct EquilibriumRecord {
    PointCoords point;
    Eigenvalues eigenvalues;
    Classification classification;
    double residual = 0.0;  ///< Euclidean norm of the field at point
};

struct EquilibriumSearch {
    int grid_per_dim = 8;
    double newton_tol = 1e-10;
    int max_iterations = 50;
    double hyp_tol = kDefaultHyperbolicityTol;
};

/// Newton iteration seeded at every node of a uniform grid over region.
/// Seeds with a singular Jacobian or no convergence are dropped. Roots are
/// deduplicated within kDedupRadius and sorted lexicographically.
/// Throws PreconditionError if grid_per_dim < 2.
[[nodiscard]] std::vector<EquilibriumRecord> find_equilibria(const SystemDef& sys, const RegionSpec& region,
                                                             const EquilibriumSearch& search = {});

/// Jacobian of the field at p. Throws PreconditionError unless the residual
/// at p is below 1e-8.
[[nodiscard]] Eigen::MatrixXd linearize(const SystemDef& sys, const PointCoords& p);

/// Eigenvalues of a real square matrix, sorted by (real, imag).
[[nodiscard]] Eigenvalues eigenvalues(const Eigen::MatrixXd& m);

[[nodiscard]] Classification classify(const Eigenvalues& eigs, double hyp_tol = kDefaultHyperbolicityTol);

/// Builds a record for a known equilibrium (linearize + classify).
[[nodiscard]] EquilibriumRecord analyze_equilibrium(const SystemDef& sys, const PointCoords& p,
                                                    double hyp_tol = kDefaultHyperbolicityTol);

struct BlockStructureReport {
    bool ok = false;
    double lower_left_norm = 0.0;  ///< max |d g / d x|
    double max_pairing_error = 0.0;
    Eigenvalues full;
    Eigenvalues outer_block;  ///< spectrum of d_x f at (x, 0_Y)
    Eigenvalues inner_block;  ///< spectrum of d_y g at 0_Y
    Classification classification;
    std::string message;
};

/// Checks that the cascade Jacobian at (x, 0_Y) is block lower triangular
/// with zero d_x g block, and that its spectrum is the union of the diagonal
/// block spectra (greedy nearest pairing within 1e-6).
/// Throws PreconditionError unless the inner part of eq is 0_Y.
[[nodiscard]] BlockStructureReport cascade_block_structure(const CascadeDef& cas, const PointCoords& eq,
                                                           double hyp_tol = kDefaultHyperbolicityTol);

/// Greedy nearest pairing of two multisets; returns the largest paired
/// distance, or +inf if the sizes differ.
[[nodiscard]] double spectrum_pairing_error(const Eigenvalues& a, const Eigenvalues& b);

}  // namespace cascade
