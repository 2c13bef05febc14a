#pragma once

// Set-oriented approximation of the chain recurrent set.
//
// A region is tiled by dyadic boxes. Sample points of each box are flowed
// for time T; box i gets an edge to every box j whose eps-inflation contains
// an endpoint. Nodes on directed cycles of this graph cover the points that
// admit closed (eps, T)-chains at this resolution.

#include "cascade/dynamics.hpp"
#include "cascade/equilibria.hpp"
#include "cascade/region.hpp"

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace cascade {

inline constexpr std::size_t kMaxBoxes = 10'000'000;

class BoxCover {
public:
    using Cell = std::vector<std::int64_t>;

    /// Uniform cover with 2^depth boxes per dimension. Throws ResourceError
    /// past kMaxBoxes and PreconditionError for negative depth.
    [[nodiscard]] static BoxCover uniform(const RegionSpec& region, int depth);

    [[nodiscard]] const RegionSpec& region() const noexcept { return region_; }
    [[nodiscard]] int depth() const noexcept { return depth_; }
    [[nodiscard]] std::size_t size() const noexcept { return cells_.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return region_.dim(); }
    [[nodiscard]] const Cell& cell(std::size_t i) const { return cells_.at(i); }
    [[nodiscard]] std::int64_t cells_per_dim() const noexcept { return std::int64_t{1} << depth_; }

    [[nodiscard]] PointCoords center(std::size_t i) const;
    /// Identical for every box at this depth.
    [[nodiscard]] const PointCoords& half_widths() const noexcept { return half_widths_; }
    /// Metric length of the box diagonal.
    [[nodiscard]] double diameter() const;

    /// Index of the box with grid coordinates `cell`, if it is in the cover.
    [[nodiscard]] std::optional<std::size_t> find(const Cell& cell) const;

    /// Metric distance from p to the closed box (zero inside). Exact for
    /// diagonal metrics; for others the distance to the per-axis clamp.
    [[nodiscard]] double distance_to_box(std::size_t i, const PointCoords& p) const;

    /// Boxes whose eps-inflation contains p (distance_to_box < eps), sorted.
    [[nodiscard]] std::vector<std::size_t> boxes_near(const PointCoords& p, double eps) const;

    /// Box samples in order: center, 2^dim corners, then lattice points.
    [[nodiscard]] std::vector<PointCoords> samples(std::size_t i, std::size_t count, std::uint64_t seed) const;

    /// Total chart volume of the listed boxes.
    [[nodiscard]] double volume(const std::vector<std::size_t>& boxes) const;

    BoxCover(RegionSpec region, int depth, std::vector<Cell> cells);

private:
    [[nodiscard]] std::uint64_t key(const Cell& cell) const;

    RegionSpec region_;
    int depth_;
    std::vector<Cell> cells_;
    PointCoords half_widths_;
    std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

/// build_cover(region, depth): see BoxCover::uniform.
[[nodiscard]] BoxCover build_cover(const RegionSpec& region, int depth);

/// Bisects every kept box along every axis and drops the rest.
/// Throws PreconditionError if keep is empty and ResourceError past kMaxBoxes.
[[nodiscard]] BoxCover refine(const BoxCover& cover, const std::vector<std::size_t>& keep);

/// Default number of samples per box: center + 2^dim corners + 16 lattice points.
[[nodiscard]] std::size_t default_samples_per_box(std::size_t dim);

struct TransitionParams {
    double T = 1.0;
    double eps = 0.0;                 ///< 0 means the cover's box diameter
    std::size_t samples_per_box = 0;  ///< 0 means default_samples_per_box
    double tol = 1e-7;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct TransitionGraph {
    std::size_t box_count = 0;                       ///< node box_count is EXIT
    std::vector<std::vector<std::uint32_t>> edges;   ///< sorted successor lists, size box_count
    std::vector<bool> exits;                         ///< box has an edge to EXIT
    double eps = 0.0;
    double T = 0.0;
    std::size_t samples_per_box = 0;
    std::size_t divergences = 0;

    [[nodiscard]] std::size_t exit_node() const noexcept { return box_count; }
    [[nodiscard]] bool has_edge(std::size_t from, std::size_t to) const;
    [[nodiscard]] std::size_t edge_count() const;
};

[[nodiscard]] TransitionGraph build_transition_graph(const BoxCover& cover, const SystemDef& sys,
                                                     const TransitionParams& params);

/// Strongly connected components (iterative Tarjan). Returns the component
/// id of each node; ids are in reverse topological order of discovery.
[[nodiscard]] std::vector<std::uint32_t> strongly_connected_components(
    const std::vector<std::vector<std::uint32_t>>& adjacency, std::size_t* component_count = nullptr);

struct ChainRecurrentApprox {
    std::vector<std::size_t> recurrent_boxes;  ///< sorted
    std::vector<std::uint32_t> scc_id;         ///< per box
    double eps = 0.0;
    double T = 0.0;

    [[nodiscard]] bool is_recurrent(std::size_t box) const;
};

[[nodiscard]] ChainRecurrentApprox chain_recurrent_approx(const TransitionGraph& graph);

/// 5x the slowest linear time constant at the first stable equilibrium, or 1.
[[nodiscard]] double default_chain_time(const std::vector<EquilibriumRecord>& eqs);

struct RecurrenceCheck {
    bool pass = false;
    double margin = 0.0;
    double worst_distance = 0.0;                 ///< max over recurrent boxes of distance to nearest equilibrium
    std::vector<std::size_t> far_boxes;          ///< recurrent boxes beyond margin
    std::vector<std::size_t> uncovered_equilibria;
    std::string message;
};

/// R = E at box resolution: every recurrent box center is within margin of an
/// equilibrium and every equilibrium lies in a recurrent box. margin <= 0
/// selects 2 (diameter + eps).
[[nodiscard]] RecurrenceCheck check_R_equals_E(const ChainRecurrentApprox& approx, const BoxCover& cover,
                                               const std::vector<EquilibriumRecord>& eqs, double margin = 0.0);

/// Recurrent boxes whose sampled V range sits farther from every equilibrium
/// value of V than the box's own V oscillation.
[[nodiscard]] std::vector<std::size_t> localization_violations(const ChainRecurrentApprox& approx,
                                                               const BoxCover& cover, const ScalarField& v,
                                                               const std::vector<EquilibriumRecord>& eqs);

struct GradientLikeParams {
    std::size_t n_traj = 100;
    double horizon = 50.0;
    double tol = 1e-10;
    double sample_dt = 0.25;
    double min_separation = 1e-2;  ///< initial distance from every equilibrium
    double capture_radius = 1e-3;  ///< stop checking inside this ball of an equilibrium
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct GradientLikeVerdict {
    bool pass = false;
    std::size_t trajectories = 0;
    std::size_t failures = 0;
    double slack = 0.0;
    double worst_step = 0.0;  ///< largest V(t_{k+1}) - V(t_k) seen before capture
    std::optional<PointCoords> witness;
    std::string message;
};

/// Samples initial conditions in region away from the equilibria and checks
/// that V strictly decreases (by more than 10 tol) between consecutive
/// samples until the trajectory enters the capture ball of an equilibrium.
[[nodiscard]] GradientLikeVerdict verify_gradient_like(const SystemDef& sys, const ScalarField& v,
                                                       const std::vector<EquilibriumRecord>& eqs,
                                                       const RegionSpec& region, const GradientLikeParams& params);

struct ChainRecurrenceParams {
    int depth = 6;
    int rounds = 3;     ///< graph builds; each after the first refines the recurrent boxes
    double T = 0.0;     ///< <= 0 selects default_chain_time
    double eps = 0.0;   ///< <= 0 tracks the current box diameter
    std::size_t samples_per_box = 0;
    double tol = 1e-7;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct ChainRecurrenceRound {
    int depth = 0;
    std::size_t boxes = 0;
    std::size_t recurrent = 0;
    std::size_t edges = 0;
    double eps = 0.0;
    double T = 0.0;
    double recurrent_volume = 0.0;
};

struct ChainRecurrenceResult {
    BoxCover cover;
    ChainRecurrentApprox approx;
    std::vector<ChainRecurrenceRound> rounds;
};

/// Uniform cover, graph, SCCs, then refinement rounds on the recurrent boxes.
[[nodiscard]] ChainRecurrenceResult run_chain_recurrence(const SystemDef& sys, const RegionSpec& region,
                                                         const ChainRecurrenceParams& params,
                                                         const std::vector<EquilibriumRecord>& eqs = {});

}  // namespace cascade
