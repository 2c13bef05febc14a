#include "cascade/chainrec.hpp"

#include "cascade/errors.hpp"
#include "cascade/flow.hpp"
#include "cascade/parallel.hpp"
#include "cascade/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace cascade {

namespace {

std::int64_t floor_index(double x) { return static_cast<std::int64_t>(std::floor(x)); }

std::int64_t wrap_index(std::int64_t k, std::int64_t count) {
    k %= count;
    return k < 0 ? k + count : k;
}

// Additive recurrence with the generalized golden ratio; low discrepancy in
// any dimension.
std::vector<double> kronecker_alpha(std::size_t dim) {
    double phi = 2.0;
    for (int it = 0; it < 64; ++it) {
        phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(dim + 1));
    }
    std::vector<double> alpha(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        alpha[i] = std::fmod(std::pow(1.0 / phi, static_cast<double>(i + 1)), 1.0);
    }
    return alpha;
}

}  // namespace

BoxCover::BoxCover(RegionSpec region, int depth, std::vector<Cell> cells)
    : region_(std::move(region)), depth_(depth), cells_(std::move(cells)) {
    if (depth_ < 0) {
        throw PreconditionError("box cover depth must be non-negative");
    }
    if (static_cast<std::size_t>(depth_) * dim() > 63) {
        throw ResourceError("box cover depth too large for this dimension");
    }
    half_widths_ = region_.half_widths() / static_cast<double>(cells_per_dim());
    lookup_.reserve(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        lookup_.emplace(key(cells_[i]), i);
    }
}

std::uint64_t BoxCover::key(const Cell& cell) const {
    std::uint64_t k = 0;
    for (std::size_t d = 0; d < cell.size(); ++d) {
        k = (k << depth_) | static_cast<std::uint64_t>(cell[d]);
    }
    return k;
}

BoxCover BoxCover::uniform(const RegionSpec& region, int depth) {
    if (depth < 0) {
        throw PreconditionError("build_cover: depth must be non-negative");
    }
    const std::size_t n = region.dim();
    const double count = std::pow(2.0, static_cast<double>(depth) * static_cast<double>(n));
    if (count > static_cast<double>(kMaxBoxes)) {
        throw ResourceError("build_cover: " + std::to_string(count) + " boxes exceeds the limit of " +
                            std::to_string(kMaxBoxes));
    }
    const std::int64_t per_dim = std::int64_t{1} << depth;
    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(count));
    Cell cell(n, 0);
    for (;;) {
        cells.push_back(cell);
        std::size_t d = n;
        while (d > 0) {
            --d;
            if (++cell[d] < per_dim) {
                break;
            }
            cell[d] = 0;
            if (d == 0) {
                return BoxCover(region, depth, std::move(cells));
            }
        }
    }
}

BoxCover build_cover(const RegionSpec& region, int depth) { return BoxCover::uniform(region, depth); }

PointCoords BoxCover::center(std::size_t i) const {
    const Cell& c = cells_.at(i);
    const PointCoords lo = region_.lower();
    PointCoords p(static_cast<Eigen::Index>(dim()));
    for (std::size_t d = 0; d < dim(); ++d) {
        const auto k = static_cast<Eigen::Index>(d);
        p[k] = lo[k] + (2.0 * static_cast<double>(c[d]) + 1.0) * half_widths_[k];
    }
    return p;
}

double BoxCover::diameter() const {
    const PointCoords w = 2.0 * half_widths_;
    return std::sqrt(w.dot(region_.space().metric() * w));
}

std::optional<std::size_t> BoxCover::find(const Cell& cell) const {
    if (cell.size() != dim()) {
        return std::nullopt;
    }
    for (auto k : cell) {
        if (k < 0 || k >= cells_per_dim()) {
            return std::nullopt;
        }
    }
    auto it = lookup_.find(key(cell));
    if (it == lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

double BoxCover::distance_to_box(std::size_t i, const PointCoords& p) const {
    const SpaceSpec& space = region_.space();
    TangentCoords gap = chart_difference(space, center(i), p);
    for (Eigen::Index d = 0; d < gap.size(); ++d) {
        const double excess = std::abs(gap[d]) - half_widths_[d];
        gap[d] = excess > 0.0 ? std::copysign(excess, gap[d]) : 0.0;
    }
    return std::sqrt(std::max(0.0, gap.dot(space.metric() * gap)));
}

std::vector<std::size_t> BoxCover::boxes_near(const PointCoords& p, double eps) const {
    const SpaceSpec& space = region_.space();
    const std::size_t n = dim();
    const PointCoords lo = region_.lower();
    const std::int64_t count = cells_per_dim();
    std::vector<std::vector<std::int64_t>> ranges(n);
    for (std::size_t d = 0; d < n; ++d) {
        const auto k = static_cast<Eigen::Index>(d);
        const double reach = eps * std::sqrt(space.metric_inverse()(k, k));
        const double width = 2.0 * half_widths_[k];
        std::int64_t first = floor_index((p[k] - reach - lo[k]) / width);
        std::int64_t last = floor_index((p[k] + reach - lo[k]) / width);
        if (space.is_circle(d)) {
            if (last - first + 1 >= count) {
                first = 0;
                last = count - 1;
            }
            std::set<std::int64_t> wrapped;
            for (std::int64_t j = first; j <= last; ++j) {
                wrapped.insert(wrap_index(j, count));
            }
            ranges[d].assign(wrapped.begin(), wrapped.end());
        } else {
            first = std::max<std::int64_t>(first, 0);
            last = std::min<std::int64_t>(last, count - 1);
            for (std::int64_t j = first; j <= last; ++j) {
                ranges[d].push_back(j);
            }
        }
        if (ranges[d].empty()) {
            return {};
        }
    }
    std::vector<std::size_t> out;
    std::vector<std::size_t> pos(n, 0);
    Cell cell(n);
    for (;;) {
        for (std::size_t d = 0; d < n; ++d) {
            cell[d] = ranges[d][pos[d]];
        }
        if (auto idx = find(cell); idx && distance_to_box(*idx, p) < eps) {
            out.push_back(*idx);
        }
        std::size_t d = 0;
        while (d < n && ++pos[d] == ranges[d].size()) {
            pos[d] = 0;
            ++d;
        }
        if (d == n) {
            break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<PointCoords> BoxCover::samples(std::size_t i, std::size_t count, std::uint64_t seed) const {
    const std::size_t n = dim();
    const PointCoords c = center(i);
    std::vector<PointCoords> out;
    out.reserve(count);
    if (count == 0) {
        return out;
    }
    out.push_back(c);
    // Corners are pulled in by a relative 1e-6 so each lies in one box only.
    const std::size_t corners = std::size_t{1} << n;
    const PointCoords inset = half_widths_ * (1.0 - 1e-6);
    for (std::size_t m = 0; m < corners && out.size() < count; ++m) {
        PointCoords q = c;
        for (std::size_t d = 0; d < n; ++d) {
            const auto k = static_cast<Eigen::Index>(d);
            q[k] += ((m >> d) & 1U) ? inset[k] : -inset[k];
        }
        out.push_back(q);
    }
    if (out.size() < count) {
        static thread_local std::vector<double> alpha;
        if (alpha.size() != n) {
            alpha = kronecker_alpha(n);
        }
        Rng rng(seed, Stream::CoverLattice, key(cells_[i]) ^ (static_cast<std::uint64_t>(depth_) << 58));
        std::vector<double> shift(n);
        for (auto& s : shift) {
            s = rng.uniform();
        }
        for (std::size_t j = 1; out.size() < count; ++j) {
            PointCoords q = c;
            for (std::size_t d = 0; d < n; ++d) {
                const auto k = static_cast<Eigen::Index>(d);
                const double u = std::fmod(shift[d] + static_cast<double>(j) * alpha[d], 1.0);
                q[k] += (2.0 * u - 1.0) * half_widths_[k];
            }
            out.push_back(q);
        }
    }
    for (auto& q : out) {
        q = canonicalize(region_.space(), q);
    }
    return out;
}

double BoxCover::volume(const std::vector<std::size_t>& boxes) const {
    return static_cast<double>(boxes.size()) * (2.0 * half_widths_).prod();
}

BoxCover refine(const BoxCover& cover, const std::vector<std::size_t>& keep) {
    if (keep.empty()) {
        throw PreconditionError("refine: keep set must be nonempty");
    }
    const std::size_t n = cover.dim();
    const std::size_t children = std::size_t{1} << n;
    const double total = static_cast<double>(keep.size()) * static_cast<double>(children);
    if (total > static_cast<double>(kMaxBoxes)) {
        throw ResourceError("refine: " + std::to_string(total) + " boxes exceeds the limit");
    }
    std::vector<std::size_t> sorted = keep;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<BoxCover::Cell> cells;
    cells.reserve(sorted.size() * children);
    for (std::size_t i : sorted) {
        const BoxCover::Cell& parent = cover.cell(i);
        for (std::size_t m = 0; m < children; ++m) {
            BoxCover::Cell child(n);
            for (std::size_t d = 0; d < n; ++d) {
                child[d] = 2 * parent[d] + static_cast<std::int64_t>((m >> (n - 1 - d)) & 1U);
            }
            cells.push_back(std::move(child));
        }
    }
    std::sort(cells.begin(), cells.end());
    return BoxCover(cover.region(), cover.depth() + 1, std::move(cells));
}

std::size_t default_samples_per_box(std::size_t dim) { return 1 + (std::size_t{1} << dim) + 16; }

bool TransitionGraph::has_edge(std::size_t from, std::size_t to) const {
    if (from >= box_count) {
        return false;
    }
    if (to == exit_node()) {
        return exits[from];
    }
    const auto& succ = edges[from];
    return std::binary_search(succ.begin(), succ.end(), static_cast<std::uint32_t>(to));
}

std::size_t TransitionGraph::edge_count() const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < box_count; ++i) {
        total += edges[i].size() + (exits[i] ? 1 : 0);
    }
    return total;
}

TransitionGraph build_transition_graph(const BoxCover& cover, const SystemDef& sys,
                                       const TransitionParams& params) {
    if (!(params.T > 0.0)) {
        throw PreconditionError("build_transition_graph: T must be positive");
    }
    if (params.eps < 0.0) {
        throw PreconditionError("build_transition_graph: eps must be positive");
    }
    if (sys.dim() != cover.dim()) {
        throw InputError("build_transition_graph: system and cover dimensions differ");
    }
    TransitionGraph graph;
    graph.box_count = cover.size();
    graph.eps = params.eps > 0.0 ? params.eps : cover.diameter();
    graph.T = params.T;
    graph.samples_per_box = params.samples_per_box > 0 ? params.samples_per_box : default_samples_per_box(cover.dim());
    graph.edges.resize(cover.size());
    std::vector<char> exits(cover.size(), 0);
    std::vector<std::size_t> divergences(cover.size(), 0);

    FlowOptions options;
    options.tol = params.tol;
    options.record = Record::Final;

    parallel_for(cover.size(), params.threads, [&](std::size_t i) {
        std::vector<std::uint32_t> succ;
        for (const PointCoords& x : cover.samples(i, graph.samples_per_box, params.seed)) {
            PointCoords end;
            try {
                end = flow(sys, x, graph.T, options).final_point();
            } catch (const DivergenceError&) {
                exits[i] = 1;
                ++divergences[i];
                continue;
            } catch (const NumericError&) {
                exits[i] = 1;
                ++divergences[i];
                continue;
            }
            if (!cover.region().contains(end)) {
                exits[i] = 1;
            }
            const auto near = cover.boxes_near(end, graph.eps);
            if (near.empty()) {
                exits[i] = 1;
            }
            for (std::size_t j : near) {
                succ.push_back(static_cast<std::uint32_t>(j));
            }
        }
        std::sort(succ.begin(), succ.end());
        succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
        graph.edges[i] = std::move(succ);
    });
    graph.exits.assign(exits.begin(), exits.end());
    for (auto d : divergences) {
        graph.divergences += d;
    }
    return graph;
}

std::vector<std::uint32_t> strongly_connected_components(const std::vector<std::vector<std::uint32_t>>& adjacency,
                                                         std::size_t* component_count) {
    constexpr std::uint32_t kUnvisited = std::numeric_limits<std::uint32_t>::max();
    const std::size_t n = adjacency.size();
    std::vector<std::uint32_t> index(n, kUnvisited);
    std::vector<std::uint32_t> lowlink(n, 0);
    std::vector<std::uint32_t> component(n, kUnvisited);
    std::vector<bool> on_stack(n, false);
    std::vector<std::uint32_t> stack;
    // (node, next successor position) frames replace recursion.
    std::vector<std::pair<std::uint32_t, std::size_t>> frames;
    std::uint32_t next_index = 0;
    std::uint32_t next_component = 0;

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != kUnvisited) {
            continue;
        }
        frames.emplace_back(static_cast<std::uint32_t>(root), 0);
        index[root] = lowlink[root] = next_index++;
        stack.push_back(static_cast<std::uint32_t>(root));
        on_stack[root] = true;
        while (!frames.empty()) {
            auto& [v, pos] = frames.back();
            const auto& succ = adjacency[v];
            if (pos < succ.size()) {
                const std::uint32_t w = succ[pos++];
                if (w >= n) {
                    continue;
                }
                if (index[w] == kUnvisited) {
                    index[w] = lowlink[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    lowlink[v] = std::min(lowlink[v], index[w]);
                }
                continue;
            }
            const std::uint32_t done = v;
            frames.pop_back();
            if (!frames.empty()) {
                const std::uint32_t parent = frames.back().first;
                lowlink[parent] = std::min(lowlink[parent], lowlink[done]);
            }
            if (lowlink[done] == index[done]) {
                std::uint32_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    component[w] = next_component;
                } while (w != done);
                ++next_component;
            }
        }
    }
    if (component_count) {
        *component_count = next_component;
    }
    return component;
}

bool ChainRecurrentApprox::is_recurrent(std::size_t box) const {
    return std::binary_search(recurrent_boxes.begin(), recurrent_boxes.end(), box);
}

ChainRecurrentApprox chain_recurrent_approx(const TransitionGraph& graph) {
    ChainRecurrentApprox approx;
    approx.eps = graph.eps;
    approx.T = graph.T;
    std::size_t components = 0;
    approx.scc_id = strongly_connected_components(graph.edges, &components);
    std::vector<std::size_t> sizes(components, 0);
    for (auto id : approx.scc_id) {
        ++sizes[id];
    }
    for (std::size_t i = 0; i < graph.box_count; ++i) {
        const bool self_loop = graph.has_edge(i, i);
        if (self_loop || sizes[approx.scc_id[i]] > 1) {
            approx.recurrent_boxes.push_back(i);
        }
    }
    return approx;
}

double default_chain_time(const std::vector<EquilibriumRecord>& eqs) {
    for (const auto& eq : eqs) {
        if (!eq.classification.is_stable() || eq.eigenvalues.empty()) {
            continue;
        }
        double slowest = std::numeric_limits<double>::infinity();
        for (const auto& lambda : eq.eigenvalues) {
            slowest = std::min(slowest, std::abs(lambda.real()));
        }
        if (slowest > 0.0 && std::isfinite(slowest)) {
            return 5.0 / slowest;
        }
    }
    return 1.0;
}

RecurrenceCheck check_R_equals_E(const ChainRecurrentApprox& approx, const BoxCover& cover,
                                 const std::vector<EquilibriumRecord>& eqs, double margin) {
    RecurrenceCheck check;
    check.margin = margin > 0.0 ? margin : 2.0 * (cover.diameter() + approx.eps);
    const SpaceSpec& space = cover.region().space();
    for (std::size_t box : approx.recurrent_boxes) {
        const PointCoords c = cover.center(box);
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& eq : eqs) {
            nearest = std::min(nearest, dist(space, c, eq.point));
        }
        check.worst_distance = std::max(check.worst_distance, nearest);
        if (!(nearest <= check.margin)) {
            check.far_boxes.push_back(box);
        }
    }
    for (std::size_t k = 0; k < eqs.size(); ++k) {
        if (!cover.region().contains(eqs[k].point)) {
            continue;
        }
        const auto near = cover.boxes_near(eqs[k].point, 1e-9);
        const bool covered = std::any_of(near.begin(), near.end(), [&](std::size_t b) { return approx.is_recurrent(b); });
        if (!covered) {
            check.uncovered_equilibria.push_back(k);
        }
    }
    check.pass = check.far_boxes.empty() && check.uncovered_equilibria.empty();
    if (check.pass) {
        check.message = std::to_string(approx.recurrent_boxes.size()) +
                        " recurrent boxes, all near equilibria; every equilibrium covered";
    } else {
        check.message = std::to_string(check.far_boxes.size()) + " recurrent boxes farther than margin from every equilibrium; " +
                        std::to_string(check.uncovered_equilibria.size()) + " equilibria not covered";
    }
    return check;
}

std::vector<std::size_t> localization_violations(const ChainRecurrentApprox& approx, const BoxCover& cover,
                                                 const ScalarField& v, const std::vector<EquilibriumRecord>& eqs) {
    std::vector<double> levels;
    for (const auto& eq : eqs) {
        levels.push_back(v(eq.point));
    }
    std::vector<std::size_t> out;
    const std::size_t count = default_samples_per_box(cover.dim());
    for (std::size_t box : approx.recurrent_boxes) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& p : cover.samples(box, count, 0)) {
            const double value = v(p);
            lo = std::min(lo, value);
            hi = std::max(hi, value);
        }
        const double oscillation = hi - lo;
        double gap = std::numeric_limits<double>::infinity();
        for (double level : levels) {
            gap = std::min(gap, level < lo ? lo - level : (level > hi ? level - hi : 0.0));
        }
        if (gap > oscillation) {
            out.push_back(box);
        }
    }
    return out;
}

GradientLikeVerdict verify_gradient_like(const SystemDef& sys, const ScalarField& v,
                                         const std::vector<EquilibriumRecord>& eqs, const RegionSpec& region,
                                         const GradientLikeParams& params) {
    if (params.n_traj < 1) {
        throw PreconditionError("verify_gradient_like: n_traj must be at least 1");
    }
    const SpaceSpec& space = sys.space();
    GradientLikeVerdict verdict;
    verdict.slack = 10.0 * params.tol;
    verdict.trajectories = params.n_traj;

    struct Outcome {
        bool ok = true;
        double worst = -std::numeric_limits<double>::infinity();
        PointCoords start;
        std::string reason;
    };
    std::vector<Outcome> outcomes(params.n_traj);

    FlowOptions options;
    options.tol = params.tol;
    options.record = Record::Grid;
    options.sample_dt = params.sample_dt;

    auto near_equilibrium = [&](const PointCoords& p, double radius) {
        return std::any_of(eqs.begin(), eqs.end(), [&](const auto& eq) { return dist(space, p, eq.point) < radius; });
    };

    parallel_for(params.n_traj, params.threads, [&](std::size_t k) {
        Outcome& out = outcomes[k];
        Rng rng(params.seed, Stream::GradientLike, k);
        PointCoords x0 = region.sample(rng);
        for (int attempt = 0; attempt < 1000 && near_equilibrium(x0, params.min_separation); ++attempt) {
            x0 = region.sample(rng);
        }
        out.start = x0;
        Trajectory traj;
        try {
            traj = flow(sys, x0, params.horizon, options);
        } catch (const DivergenceError& e) {
            out.ok = false;
            out.reason = std::string("divergence: ") + e.what();
            return;
        }
        double previous = v(traj.points.front());
        for (std::size_t s = 1; s < traj.size(); ++s) {
            const double current = v(traj.points[s]);
            const double step = current - previous;
            out.worst = std::max(out.worst, step);
            if (!(step < -verdict.slack)) {
                out.ok = false;
                out.reason = "V did not decrease at t = " + std::to_string(traj.times[s]);
                return;
            }
            if (near_equilibrium(traj.points[s], params.capture_radius)) {
                return;
            }
            previous = current;
        }
    });

    verdict.worst_step = -std::numeric_limits<double>::infinity();
    for (const auto& out : outcomes) {
        verdict.worst_step = std::max(verdict.worst_step, out.worst);
        if (!out.ok) {
            ++verdict.failures;
            if (!verdict.witness) {
                verdict.witness = out.start;
                verdict.message = out.reason;
            }
        }
    }
    verdict.pass = verdict.failures == 0;
    if (verdict.pass) {
        verdict.message = "V strictly decreasing on all " + std::to_string(params.n_traj) + " sampled trajectories";
    }
    return verdict;
}

ChainRecurrenceResult run_chain_recurrence(const SystemDef& sys, const RegionSpec& region,
                                           const ChainRecurrenceParams& params,
                                           const std::vector<EquilibriumRecord>& eqs) {
    if (params.rounds < 1) {
        throw PreconditionError("run_chain_recurrence: need at least one round");
    }
    const double T = params.T > 0.0 ? params.T : default_chain_time(eqs);
    BoxCover cover = build_cover(region, params.depth);
    std::vector<ChainRecurrenceRound> rounds;
    ChainRecurrentApprox approx;
    for (int r = 0; r < params.rounds; ++r) {
        if (r > 0) {
            if (approx.recurrent_boxes.empty()) {
                break;
            }
            cover = refine(cover, approx.recurrent_boxes);
        }
        TransitionParams tp;
        tp.T = T;
        tp.eps = params.eps > 0.0 ? params.eps : cover.diameter();
        tp.samples_per_box = params.samples_per_box;
        tp.tol = params.tol;
        tp.seed = params.seed;
        tp.threads = params.threads;
        const TransitionGraph graph = build_transition_graph(cover, sys, tp);
        approx = chain_recurrent_approx(graph);
        rounds.push_back({cover.depth(), cover.size(), approx.recurrent_boxes.size(), graph.edge_count(), graph.eps,
                          graph.T, cover.volume(approx.recurrent_boxes)});
    }
    return {std::move(cover), std::move(approx), std::move(rounds)};
}

}  // namespace cascade
