#include "cascade_cli/commands.hpp"

#include "cascade_cli/plot.hpp"

#include <cascade/certify.hpp>
#include <cascade/errors.hpp>
#include <cascade/expression.hpp>
#include <cascade/flow.hpp>

#include "CLI11.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

namespace cascade::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Inline systems

SpaceSpec space_of(const FieldDef& f) {
    std::vector<FactorKind> kinds;
    for (const auto& k : f.factors) {
        kinds.push_back(k == "circle" ? FactorKind::Circle : FactorKind::Line);
    }
    if (!f.metric) {
        return SpaceSpec(kinds);
    }
    const auto n = static_cast<Eigen::Index>(kinds.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = (*f.metric)[static_cast<std::size_t>(i * n + j)];
        }
    }
    return SpaceSpec(kinds, m);
}

Expression compile(const std::string& text, const std::vector<std::string>& names, const std::string& path) {
    try {
        return Expression::parse(text).bind(names);
    } catch (const InputError& e) {
        throw ConfigError(path, e.what());
    }
}

using Program = std::shared_ptr<const std::vector<Expression>>;

Program compile_all(const std::vector<std::string>& texts, const std::vector<std::string>& names,
                    const std::string& path) {
    auto out = std::make_shared<std::vector<Expression>>();
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out->push_back(compile(texts[i], names, path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

ScalarField expression_field(const SpaceSpec& space, const std::string& text, const std::vector<std::string>& names,
                             const std::string& path) {
    auto e = std::make_shared<const Expression>(compile(text, names, path));
    return ScalarField(
        space, [e](const PointCoords& p) { return e->evaluate_slots({p.data(), static_cast<std::size_t>(p.size())}); },
        {}, text);
}

std::vector<Interval> line_bounds_or(const std::optional<Bounds>& given, const SpaceSpec& space,
                                     const std::string& path) {
    std::size_t lines = 0;
    for (std::size_t i = 0; i < space.dim(); ++i) {
        lines += space.is_circle(i) ? 0 : 1;
    }
    if (given) {
        if (given->size() != lines) {
            throw ConfigError(path, "expected " + std::to_string(lines) + " intervals, one per line factor");
        }
        return *given;
    }
    return std::vector<Interval>(lines, Interval{-4.0, 4.0});
}

std::size_t line_count(const SpaceSpec& space) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < space.dim(); ++i) {
        n += space.is_circle(i) ? 0 : 1;
    }
    return n;
}

Problem inline_problem(const InlineSystem& def) {
    if (!def.is_cascade()) {
        const FieldDef& f = *def.system;
        const SpaceSpec space = space_of(f);
        const Program prog = compile_all(f.field, f.variables, "$.system.system.field");
        SystemDef sys(
            space,
            [prog](const PointCoords& p, TangentCoords& out) {
                const std::span<const double> v(p.data(), static_cast<std::size_t>(p.size()));
                for (std::size_t i = 0; i < prog->size(); ++i) {
                    out[static_cast<Eigen::Index>(i)] = (*prog)[i].evaluate_slots(v);
                }
            },
            SystemKind::Generic, {}, def.name);
        std::optional<ScalarField> v;
        if (def.lyapunov) {
            v = expression_field(space, *def.lyapunov, f.variables, "$.system.lyapunov");
        }
        const RegionSpec region(space, line_bounds_or(def.region, space, "$.system.region"));
        Problem p{.name = def.name,
                  .description = "inline system",
                  .variables = f.variables,
                  .system = std::move(sys),
                  .cascade = std::nullopt,
                  .lyapunov = std::move(v),
                  .certificate = std::nullopt,
                  .region = region,
                  .outer_region = std::nullopt,
                  .inner_region = std::nullopt,
                  .chain_region = region,
                  .target = PointCoords::Zero(static_cast<Eigen::Index>(space.dim())),
                  .regression_points = {}};
        return p;
    }

    const FieldDef& fo = *def.outer;
    const FieldDef& fi = *def.inner;
    const SpaceSpec xs = space_of(fo);
    const SpaceSpec ys = space_of(fi);
    std::vector<std::string> all = fo.variables;
    all.insert(all.end(), fi.variables.begin(), fi.variables.end());

    const Program inner_prog = compile_all(fi.field, fi.variables, "$.system.inner.field");
    SystemDef inner(
        ys,
        [inner_prog](const PointCoords& p, TangentCoords& out) {
            const std::span<const double> v(p.data(), static_cast<std::size_t>(p.size()));
            for (std::size_t i = 0; i < inner_prog->size(); ++i) {
                out[static_cast<Eigen::Index>(i)] = (*inner_prog)[i].evaluate_slots(v);
            }
        },
        SystemKind::Generic, {}, def.name + "/inner");

    const Program outer_prog = compile_all(fo.field, all, "$.system.outer.field");
    CouplingFn coupling = [outer_prog](const PointCoords& x, const PointCoords& y, TangentCoords& out) {
        thread_local std::vector<double> slots;
        slots.assign(x.data(), x.data() + x.size());
        slots.insert(slots.end(), y.data(), y.data() + y.size());
        for (std::size_t i = 0; i < outer_prog->size(); ++i) {
            out[static_cast<Eigen::Index>(i)] = (*outer_prog)[i].evaluate_slots(slots);
        }
    };
    PointCoords y0 = PointCoords::Zero(static_cast<Eigen::Index>(ys.dim()));
    if (fi.equilibrium) {
        for (std::size_t i = 0; i < fi.equilibrium->size(); ++i) {
            y0[static_cast<Eigen::Index>(i)] = (*fi.equilibrium)[i];
        }
    }
    CascadeDef cas = [&] {
        try {
            return CascadeDef(xs, std::move(coupling), std::move(inner), y0, def.name);
        } catch (const InputError& e) {
            throw ConfigError("$.system.inner.equilibrium", e.what());
        }
    }();

    const SpaceSpec full = SpaceSpec::product(xs, ys);
    const std::vector<Interval> bounds = line_bounds_or(def.region, full, "$.system.region");
    const std::size_t nx_lines = line_count(xs);
    const RegionSpec outer_region(xs, {bounds.begin(), bounds.begin() + static_cast<std::ptrdiff_t>(nx_lines)});
    const RegionSpec inner_region(ys, {bounds.begin() + static_cast<std::ptrdiff_t>(nx_lines), bounds.end()});

    std::optional<ScalarField> v;
    if (def.lyapunov) {
        v = expression_field(xs, *def.lyapunov, fo.variables, "$.system.lyapunov");
    }
    PointCoords target(static_cast<Eigen::Index>(full.dim()));
    target << PointCoords::Zero(static_cast<Eigen::Index>(xs.dim())), y0;
    Problem p{.name = def.name,
              .description = "inline cascade",
              .variables = all,
              .system = std::nullopt,
              .cascade = std::move(cas),
              .lyapunov = std::move(v),
              .certificate = std::nullopt,
              .region = RegionSpec(full, bounds),
              .outer_region = outer_region,
              .inner_region = inner_region,
              .chain_region = outer_region,
              .target = target,
              .regression_points = {}};
    return p;
}

std::vector<std::string> slice(const std::vector<std::string>& names, std::size_t from, std::size_t count) {
    return {names.begin() + static_cast<std::ptrdiff_t>(from),
            names.begin() + static_cast<std::ptrdiff_t>(from + count)};
}

void apply_certificate_overrides(Problem& p, const RunConfig& cfg) {
    if (!p.cascade || !cfg.certify || !cfg.certify->certificate) {
        return;
    }
    const CertificateDef& c = *cfg.certify->certificate;
    const std::size_t nx = p.cascade->outer_dim();
    const auto outer_names = slice(p.variables, 0, nx);
    const auto inner_names = slice(p.variables, nx, p.cascade->inner_dim());
    const SpaceSpec& xs = p.cascade->outer_space();
    const SpaceSpec& ys = p.cascade->inner_space();
    const std::string base = "$.certify.certificate.";
    auto field_or = [&](const std::optional<std::string>& text, const std::vector<std::string>& names,
                        const SpaceSpec& space, const std::optional<ScalarField>& fallback,
                        const char* key) -> ScalarField {
        if (text) {
            return expression_field(space, *text, names, base + key);
        }
        if (fallback) {
            return *fallback;
        }
        throw ConfigError(base + key, "required for this system (no built-in certificate)");
    };
    const std::optional<GrowthCertificate>& old = p.certificate;
    std::optional<ScalarField> w_default = old ? std::optional<ScalarField>(old->W) : p.lyapunov;
    ScalarField w = field_or(c.W, outer_names, xs, w_default, "W");
    ScalarField alpha = field_or(c.alpha, inner_names, ys, old ? std::optional<ScalarField>(old->alpha) : std::nullopt,
                                 "alpha");
    ScalarField beta = field_or(c.beta, inner_names, ys, old ? std::optional<ScalarField>(old->beta) : std::nullopt,
                                "beta");
    if (!c.c && !old) {
        throw ConfigError(base + "c", "required for this system (no built-in certificate)");
    }
    const double level = c.c ? *c.c : old->c;
    p.certificate = GrowthCertificate{std::move(w), std::move(alpha), std::move(beta), level};
}

// ---------------------------------------------------------------------------
// Subsystem views

struct View {
    SystemDef sys;
    RegionSpec region;
    RegionSpec chain_region;
    PointCoords target;
    std::vector<std::string> labels;
    std::string which;
};

View select_view(const Problem& p, const std::optional<std::string>& requested, const std::string& fallback,
                 const std::string& path) {
    const std::string which = requested.value_or(p.is_cascade() ? fallback : "full");
    if (!p.is_cascade()) {
        if (which != "full") {
            throw ConfigError(path, "'" + which + "' needs a cascade; '" + p.name + "' is a plain system");
        }
        return {*p.system, p.region, p.chain_region.value_or(p.region), p.target, p.variables, which};
    }
    const CascadeDef& cas = *p.cascade;
    const std::size_t nx = cas.outer_dim();
    const std::size_t ny = cas.inner_dim();
    if (which == "outer") {
        return {unforced_outer(cas), *p.outer_region, p.chain_region.value_or(*p.outer_region),
                p.target.head(static_cast<Eigen::Index>(nx)), slice(p.variables, 0, nx), which};
    }
    if (which == "inner") {
        return {cas.inner(), *p.inner_region, *p.inner_region, cas.inner_equilibrium(), slice(p.variables, nx, ny),
                which};
    }
    return {cas.full_system(), p.region, p.region, p.target, p.variables, which};
}

RegionSpec region_or(const std::optional<Bounds>& b, const RegionSpec& fallback, const std::string& path) {
    if (!b) {
        return fallback;
    }
    return RegionSpec(fallback.space(), line_bounds_or(b, fallback.space(), path));
}

PointCoords to_point(const std::vector<double>& v, std::size_t dim, const std::string& path) {
    if (v.size() != dim) {
        throw ConfigError(path, "expected " + std::to_string(dim) + " coordinates, got " + std::to_string(v.size()));
    }
    PointCoords p(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        p[static_cast<Eigen::Index>(i)] = v[i];
    }
    return p;
}

EquilibriumSearch search_from(const SearchKeys& k) {
    EquilibriumSearch s;
    s.grid_per_dim = k.grid_per_dim.value_or(s.grid_per_dim);
    s.newton_tol = k.newton_tol.value_or(s.newton_tol);
    s.max_iterations = k.max_iterations.value_or(s.max_iterations);
    s.hyp_tol = k.hyperbolicity_tol.value_or(s.hyp_tol);
    return s;
}

ChainRecurrenceParams chain_from(const ChainKeys& k, std::uint64_t seed, unsigned threads) {
    ChainRecurrenceParams c;
    c.depth = k.depth.value_or(c.depth);
    c.rounds = k.rounds.value_or(c.rounds);
    c.T = k.T.value_or(c.T);
    c.eps = k.epsilon.value_or(c.eps);
    c.samples_per_box = k.samples_per_box.value_or(c.samples_per_box);
    c.tol = k.tol.value_or(c.tol);
    c.seed = seed;
    c.threads = threads;
    return c;
}

BasinParams basin_from(const SampleKeys& k, double default_horizon, std::uint64_t seed, unsigned threads) {
    BasinParams b;
    b.n = k.n.value_or(b.n);
    b.horizon = k.horizon.value_or(default_horizon);
    b.conv_tol = k.conv_tol.value_or(b.conv_tol);
    b.tol = k.tol.value_or(b.tol);
    b.seed = seed;
    b.threads = threads;
    return b;
}

std::pair<std::size_t, std::size_t> default_axes(const View& v) {
    // Torus projection (theta, phi) for a cascade of two tangent bundles of S^1.
    if (v.sys.dim() == 4 && v.sys.space().is_circle(0) && v.sys.space().is_circle(2)) {
        return {0, 2};
    }
    return {0, 1};
}

std::pair<std::size_t, std::size_t> axes_or(const std::optional<std::vector<int>>& given, const View& v) {
    if (!given) {
        return default_axes(v);
    }
    if ((*given)[0] < 0 || (*given)[1] < 0) {
        throw InputError("plot axes must be non-negative");
    }
    return {static_cast<std::size_t>((*given)[0]), static_cast<std::size_t>((*given)[1])};
}

std::string point_string(const PointCoords& p) {
    std::ostringstream os;
    os.precision(6);
    os << '(';
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        os << (i ? ", " : "") << (p[i] == 0.0 ? 0.0 : p[i]);
    }
    os << ')';
    return os.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Context {
    const RunConfig& cfg;
    fs::path out_dir;
    std::uint64_t seed;
    unsigned threads;
    std::ostream& log;

    void write(const std::string& name, const std::string& content) const {
        write_file_atomic(out_dir / name, content);
        log << "  wrote " << (out_dir / name).string() << "\n";
    }
};

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const Problem& p, const Context& ctx) {
    const SimulateBlock b = ctx.cfg.simulate.value_or(SimulateBlock{});
    const View v = select_view(p, b.subsystem, "full", "$.simulate.subsystem");
    std::vector<PointCoords> starts;
    if (b.from) {
        for (std::size_t k = 0; k < b.from->size(); ++k) {
            starts.push_back(to_point((*b.from)[k], v.sys.dim(), "$.simulate.from[" + std::to_string(k) + "]"));
        }
    } else if (v.which == "full" && !p.regression_points.empty()) {
        starts = p.regression_points;
    } else {
        throw ConfigError("$.simulate.from", "no initial condition given (use --from)");
    }
    FlowOptions opt;
    opt.tol = b.tol.value_or(1e-9);
    opt.sample_dt = b.sample_dt.value_or(0.05);
    const std::string record = b.record.value_or("grid");
    opt.record = record == "steps" ? Record::Steps : record == "final" ? Record::Final : Record::Grid;
    const double t_end = b.t.value_or(100.0);

    std::vector<Trajectory> trajs;
    int status = kExitPass;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        try {
            Trajectory traj = flow(v.sys, starts[k], t_end, opt);
            std::ostringstream csv;
            write_trajectory_csv(csv, traj);
            ctx.write("trajectory_" + std::to_string(k) + ".csv", csv.str());
            ctx.log << "  trajectory " << k << ": " << point_string(starts[k]) << " -> "
                    << point_string(traj.final_point()) << " at t = " << traj.final_time()
                    << ", dist to target = " << dist(v.sys.space(), traj.final_point(), v.target) << "\n";
            trajs.push_back(std::move(traj));
        } catch (const DivergenceError& e) {
            ctx.log << "  trajectory " << k << " diverged: " << e.what() << "\n";
            status = kExitFail;
        }
    }
    if (v.sys.dim() >= 2) {
        const auto [ax, ay] = axes_or(b.plot_axes, v);
        PlotFrame frame = make_frame(v.region, ax, ay, v.labels);
        fit_to(frame, trajs);
        ctx.write("trajectories.svg", trajectory_svg(trajs, frame));
    }
    return status;
}

int cmd_equilibria(const Problem& p, const Context& ctx) {
    const EquilibriaBlock b = ctx.cfg.equilibria.value_or(EquilibriaBlock{});
    const View v = select_view(p, b.subsystem, "full", "$.equilibria.subsystem");
    const RegionSpec region = region_or(b.region, v.region, "$.equilibria.region");
    const auto eqs = find_equilibria(v.sys, region, search_from(b.search));
    json out = json::array();
    for (const auto& e : eqs) {
        out.push_back(to_json(e));
        ctx.log << "  " << point_string(e.point) << "  " << to_string(e.classification) << "\n";
    }
    ctx.write("equilibria.json", dump(out));
    return kExitPass;
}

int cmd_chainrec(const Problem& p, const Context& ctx) {
    const ChainrecBlock b = ctx.cfg.chainrec.value_or(ChainrecBlock{});
    const View v = select_view(p, b.subsystem, "outer", "$.chainrec.subsystem");
    const RegionSpec region = region_or(b.region, v.chain_region, "$.chainrec.region");
    const auto eqs = find_equilibria(v.sys, region, search_from(b.search));
    const ChainRecurrenceParams params = chain_from(b.chain, ctx.seed, ctx.threads);
    const ChainRecurrenceResult r = run_chain_recurrence(v.sys, region, params, eqs);
    const RecurrenceCheck check = check_R_equals_E(r.approx, r.cover, eqs);

    json rounds = json::array();
    for (const auto& rd : r.rounds) {
        rounds.push_back({{"depth", rd.depth},
                          {"boxes", rd.boxes},
                          {"recurrent", rd.recurrent},
                          {"edges", rd.edges},
                          {"eps", rd.eps},
                          {"T", rd.T},
                          {"recurrent_volume", rd.recurrent_volume}});
        ctx.log << "  depth " << rd.depth << ": " << rd.boxes << " boxes, " << rd.recurrent << " recurrent\n";
    }
    json eq_json = json::array();
    for (const auto& e : eqs) {
        eq_json.push_back(to_json(e));
    }
    const bool pass = check.pass;
    json summary = {{"system", p.name},
                    {"subsystem", v.which},
                    {"parameters",
                     {{"depth", params.depth},
                      {"rounds", params.rounds},
                      {"T", r.approx.T},
                      {"eps", r.approx.eps},
                      {"samples_per_box", params.samples_per_box ? params.samples_per_box
                                                                 : default_samples_per_box(v.sys.dim())},
                      {"tol", params.tol},
                      {"seed", params.seed}}},
                    {"rounds", rounds},
                    {"equilibria", eq_json},
                    {"recurrent_boxes", r.approx.recurrent_boxes.size()},
                    {"check",
                     {{"margin", check.margin},
                      {"worst_distance", check.worst_distance},
                      {"far_boxes", check.far_boxes.size()},
                      {"uncovered_equilibria", check.uncovered_equilibria.size()},
                      {"message", check.message}}},
                    {"verdict", pass ? "PASS" : "FAIL"}};
    ctx.write("chainrec.json", dump(summary));

    std::ostringstream csv;
    csv.precision(17);
    csv << "scc";
    for (std::size_t i = 0; i < v.sys.dim(); ++i) {
        csv << ",center_" << i;
    }
    csv << '\n';
    for (std::size_t box : r.approx.recurrent_boxes) {
        csv << r.approx.scc_id[box];
        const PointCoords c = r.cover.center(box);
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            csv << ',' << c[i];
        }
        csv << '\n';
    }
    ctx.write("recurrent_boxes.csv", csv.str());
    if (v.sys.dim() >= 2) {
        const auto [ax, ay] = axes_or(b.plot_axes, v);
        std::vector<PointCoords> points;
        for (const auto& e : eqs) {
            points.push_back(e.point);
        }
        ctx.write("recurrent_boxes.svg",
                  boxes_svg(r.cover, r.approx.recurrent_boxes, points, make_frame(region, ax, ay, v.labels)));
    }
    ctx.log << "  " << check.message << "\n  verdict " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? kExitPass : kExitFail;
}

int cmd_basin(const Problem& p, const Context& ctx) {
    const BasinBlock b = ctx.cfg.basin.value_or(BasinBlock{});
    const View v = select_view(p, b.subsystem, "full", "$.basin.subsystem");
    const RegionSpec region = region_or(b.region, v.region, "$.basin.region");
    const bool cascade_full = p.is_cascade() && v.which == "full";
    BasinParams params = basin_from(b.sample, cascade_full ? 200.0 : 100.0, ctx.seed, ctx.threads);
    params.max_witnesses = b.max_witnesses.value_or(params.max_witnesses);
    const double threshold = b.sample.threshold.value_or(cascade_full ? 0.99 : 0.999);
    const PointCoords target = b.target ? to_point(*b.target, v.sys.dim(), "$.basin.target") : v.target;
    const BasinEstimate est = monte_carlo_basin(v.sys, target, region, params);
    const bool pass = est.fraction >= threshold;
    json out = to_json(est);
    out["parameters"] = {{"n", params.n},
                         {"horizon", params.horizon},
                         {"conv_tol", params.conv_tol},
                         {"tol", params.tol},
                         {"seed", params.seed},
                         {"threshold", threshold},
                         {"target", point_json(target)},
                         {"subsystem", v.which}};
    out["system"] = p.name;
    out["verdict"] = pass ? "PASS" : "FAIL";
    ctx.write("basin.json", dump(out));
    ctx.log << "  converged " << est.n_converged << " / " << est.n_samples << " (fraction " << est.fraction
            << ", Wilson 95% lower bound " << est.wilson_lower << "), diverged " << est.n_diverged << "\n"
            << "  verdict " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? kExitPass : kExitFail;
}

std::string witness_value(const json& v) {
    if (v.is_array()) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            s += (i ? ";" : "") + witness_value(v[i]);
        }
        return s;
    }
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        for (char& c : s) {
            if (c == ',' || c == '\n') c = ' ';
        }
        return s;
    }
    return v.dump();
}

int cmd_certify(Problem& p, const Context& ctx) {
    if (!p.is_cascade()) {
        throw ConfigError("$.system", "certify needs a cascade; '" + p.name + "' is a plain system");
    }
    if (!p.certificate) {
        throw ConfigError("$.certify.certificate", "no growth certificate for '" + p.name + "'");
    }
    if (!p.lyapunov) {
        throw ConfigError("$.system.lyapunov", "certify needs a Lyapunov function V for the unforced outer loop");
    }
    const CertifyBlock b = ctx.cfg.certify.value_or(CertifyBlock{});
    const std::uint64_t seed = ctx.seed;
    const unsigned threads = ctx.threads;
    CascadeCertifyParams params{
        .inner_region = region_or(b.inner_region, *p.inner_region, "$.certify.inner_region"),
        .outer_region = region_or(b.outer_region, *p.outer_region, "$.certify.outer_region")};
    const EquilibriumSearch search = search_from(b.equilibria.value_or(SearchKeys{}));
    params.inner.search = search;
    params.inner.basin = basin_from(b.inner_basin.value_or(SampleKeys{}), 100.0, seed, threads);
    params.inner.threshold = b.inner_basin && b.inner_basin->threshold ? *b.inner_basin->threshold : 0.999;

    params.outer.search = search;
    params.outer.chain = chain_from(b.chain.value_or(ChainKeys{}), seed, threads);
    params.outer.chain_region = region_or(b.chain_region, p.chain_region.value_or(params.outer_region),
                                          "$.certify.chain_region");
    const GradientKeys g = b.gradient.value_or(GradientKeys{});
    params.outer.gradient.n_traj = g.n_traj.value_or(params.outer.gradient.n_traj);
    params.outer.gradient.horizon = g.horizon.value_or(params.outer.gradient.horizon);
    params.outer.gradient.tol = g.tol.value_or(params.outer.gradient.tol);
    params.outer.gradient.seed = seed;
    params.outer.gradient.threads = threads;
    params.outer.basin = basin_from(b.outer_basin.value_or(SampleKeys{}), 100.0, seed, threads);
    params.outer.threshold = b.outer_basin && b.outer_basin->threshold ? *b.outer_basin->threshold : 0.999;

    const GrowthKeys gr = b.growth.value_or(GrowthKeys{});
    params.growth.n_x = gr.n_x.value_or(params.growth.n_x);
    params.growth.n_y = gr.n_y.value_or(params.growth.n_y);
    params.growth.proposal_budget = gr.proposal_budget.value_or(params.growth.proposal_budget);
    params.growth.max_escalations = gr.max_escalations.value_or(params.growth.max_escalations);
    params.growth.inner_horizon = gr.inner_horizon.value_or(params.growth.inner_horizon);
    params.growth.slack = gr.slack.value_or(params.growth.slack);
    params.growth.tol = gr.tol.value_or(params.growth.tol);
    params.growth.seed = seed;
    params.growth.threads = threads;

    const ComparisonKeys cmp = b.comparison.value_or(ComparisonKeys{});
    params.comparison_trajectories = cmp.trajectories.value_or(params.comparison_trajectories);
    params.comparison_horizon = cmp.horizon.value_or(params.comparison_horizon);
    params.comparison_sample_dt = cmp.sample_dt.value_or(params.comparison_sample_dt);
    if (cmp.regression_points.value_or(true)) {
        params.regression_points = p.regression_points;
    }
    params.cascade_basin = basin_from(b.cascade_basin.value_or(SampleKeys{}), 200.0, seed, threads);
    params.cascade_threshold =
        b.cascade_basin && b.cascade_basin->threshold ? *b.cascade_basin->threshold : params.cascade_threshold;
    params.perturbation = b.perturbation.value_or(params.perturbation);
    params.rate_slack = b.rate_slack.value_or(params.rate_slack);
    params.seed = seed;
    params.threads = threads;

    const CertificationReport report = certify_cascade(*p.cascade, *p.lyapunov, *p.certificate, params);
    ctx.write("report.json", dump(to_json(report)));

    if (b.witnesses_csv.value_or(true)) {
        std::ostringstream csv;
        csv << "condition,witness,field,value\n";
        for (const auto& c : report.conditions) {
            for (std::size_t k = 0; k < c.witnesses.size(); ++k) {
                for (const auto& item : c.witnesses[k].items()) {
                    csv << c.id << ',' << k << ',' << item.key() << ',' << witness_value(item.value()) << '\n';
                }
            }
        }
        ctx.write("witnesses.csv", csv.str());
    }
    for (const auto& c : report.conditions) {
        ctx.log << "  " << c.id << ": " << to_string(c.verdict) << "  " << c.summary << "\n";
    }
    ctx.log << "  overall " << to_string(report.overall) << "\n";
    switch (report.overall) {
        case Verdict::Pass: return kExitPass;
        case Verdict::Fail: return kExitFail;
        case Verdict::Inconclusive: return kExitInconclusive;
    }
    return kExitInconclusive;
}

int cmd_list(std::ostream& log) {
    for (const auto& name : builtin_names()) {
        const Problem p = make_builtin(name);
        log << name << (p.is_cascade() ? "  [cascade]  " : "  [system]   ") << p.description << "\n";
    }
    return kExitPass;
}

std::vector<double> parse_point(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
            throw ConfigError("--from", "'" + text + "' is not a comma-separated list of numbers");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

std::optional<Command> command_from_string(std::string_view name) {
    if (name == "simulate") return Command::Simulate;
    if (name == "equilibria") return Command::Equilibria;
    if (name == "chainrec") return Command::Chainrec;
    if (name == "basin") return Command::Basin;
    if (name == "certify") return Command::Certify;
    if (name == "list-examples") return Command::ListExamples;
    return std::nullopt;
}

std::string to_string(Command cmd) {
    switch (cmd) {
        case Command::Simulate: return "simulate";
        case Command::Equilibria: return "equilibria";
        case Command::Chainrec: return "chainrec";
        case Command::Basin: return "basin";
        case Command::Certify: return "certify";
        case Command::ListExamples: return "list-examples";
    }
    return "?";
}

Problem resolve_problem(const RunConfig& cfg) {
    Problem p = [&] {
        if (cfg.system_inline) {
            return inline_problem(*cfg.system_inline);
        }
        if (!cfg.system_name) {
            throw ConfigError("$.system", "no system selected (give a built-in name or an inline definition)");
        }
        try {
            return make_builtin(*cfg.system_name);
        } catch (const InputError& e) {
            throw ConfigError("$.system", e.what());
        }
    }();
    apply_certificate_overrides(p, cfg);
    return p;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw ResourceError("cannot open " + tmp.string() + " for writing");
        }
        os << content;
        os.flush();
        if (!os) {
            throw ResourceError("write to " + tmp.string() + " failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ResourceError("cannot rename " + tmp.string() + " to " + path.string());
    }
}

int run_command(const RunConfig& cfg, Command cmd, std::ostream& log, std::ostream& err) {
    try {
        if (cmd == Command::ListExamples) {
            return cmd_list(log);
        }
        Problem p = resolve_problem(cfg);
        const fs::path out_dir = cfg.output_dir.value_or("out");
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) {
            err << "error: cannot create output directory " << out_dir.string() << ": " << ec.message() << "\n";
            return kExitUsage;
        }
        const Context ctx{cfg, out_dir, cfg.seed.value_or(0), cfg.threads.value_or(0), log};
        log << to_string(cmd) << " " << p.name << "\n";
        ctx.write("config.json", dump(serialize(cfg)));
        switch (cmd) {
            case Command::Simulate: return cmd_simulate(p, ctx);
            case Command::Equilibria: return cmd_equilibria(p, ctx);
            case Command::Chainrec: return cmd_chainrec(p, ctx);
            case Command::Basin: return cmd_basin(p, ctx);
            case Command::Certify: return cmd_certify(p, ctx);
            case Command::ListExamples: break;
        }
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
    } catch (const InputError& e) {
        err << "usage error: " << e.what() << "\n";
    } catch (const ResourceError& e) {
        err << "I/O error: " << e.what() << "\n";
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
    }
    return kExitUsage;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sampled-evidence stability certification for cascaded systems on flat product manifolds"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::string out_dir;
    std::string system;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::vector<std::string> from;
    double t = 0.0, tol = 0.0, horizon = 0.0;
    std::size_t n = 0;
    int depth = 0;
    std::string subsystem;

    struct Sub {
        CLI::App* app;
        Command cmd;
    };
    std::vector<Sub> subs;
    const std::pair<const char*, const char*> names[] = {
        {"simulate", "integrate trajectories and write CSV + SVG"},
        {"equilibria", "find and classify equilibria"},
        {"chainrec", "box-cover approximation of the chain recurrent set"},
        {"basin", "Monte Carlo basin-of-attraction estimate"},
        {"certify", "check the five cascade stability conditions on sampled evidence"},
        {"list-examples", "list built-in systems"}};
    for (const auto& [name, help] : names) {
        CLI::App* sub = app.add_subcommand(name, help);
        subs.push_back({sub, *command_from_string(name)});
        if (std::string_view(name) == "list-examples") {
            continue;
        }
        sub->add_option("system", system, "built-in system name (overrides the config)");
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "64-bit seed");
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
        sub->add_option("--subsystem", subsystem, "full | outer | inner");
        if (std::string_view(name) == "simulate") {
            sub->add_option("--from", from, "initial condition a,b,... (repeatable)");
            sub->add_option("--t", t, "final time");
            sub->add_option("--tol", tol, "integrator tolerance");
        }
        if (std::string_view(name) == "chainrec") {
            sub->add_option("--depth", depth, "initial subdivision depth");
            sub->add_option("--tol", tol, "integrator tolerance");
        }
        if (std::string_view(name) == "basin") {
            sub->add_option("--n", n, "number of samples");
            sub->add_option("--horizon", horizon, "integration horizon");
            sub->add_option("--tol", tol, "integrator tolerance");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitPass;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitPass;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }

    const Sub* chosen = nullptr;
    for (const auto& s : subs) {
        if (s.app->parsed()) {
            chosen = &s;
        }
    }
    if (chosen == nullptr) {
        err << "usage error: no command given\n";
        return kExitUsage;
    }
    const CLI::App& sub = *chosen->app;
    const Command cmd = chosen->cmd;
    auto given = [&sub](const char* name) {
        const CLI::Option* opt = sub.get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };

    RunConfig cfg;
    try {
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) {
                err << "I/O error: cannot read " << config_path << "\n";
                return kExitUsage;
            }
            std::stringstream buf;
            buf << is.rdbuf();
            cfg = parse_config_text(buf.str());
        }
        if (!system.empty()) {
            cfg.system_name = system;
            cfg.system_inline.reset();
        }
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (given("--seed")) cfg.seed = seed;
        if (given("--threads")) cfg.threads = threads;
        std::optional<std::string> subsys;
        if (!subsystem.empty()) {
            if (subsystem != "full" && subsystem != "outer" && subsystem != "inner") {
                throw ConfigError("--subsystem", "expected full, outer or inner");
            }
            subsys = subsystem;
        }
        switch (cmd) {
            case Command::Simulate: {
                SimulateBlock b = cfg.simulate.value_or(SimulateBlock{});
                if (!from.empty()) {
                    std::vector<std::vector<double>> points;
                    for (const auto& f : from) points.push_back(parse_point(f));
                    b.from = points;
                }
                if (given("--t")) {
                    if (!(t > 0.0)) throw ConfigError("--t", "must be positive");
                    b.t = t;
                }
                if (given("--tol")) b.tol = tol;
                if (subsys) b.subsystem = subsys;
                cfg.simulate = b;
                break;
            }
            case Command::Equilibria: {
                EquilibriaBlock b = cfg.equilibria.value_or(EquilibriaBlock{});
                if (subsys) b.subsystem = subsys;
                cfg.equilibria = b;
                break;
            }
            case Command::Chainrec: {
                ChainrecBlock b = cfg.chainrec.value_or(ChainrecBlock{});
                if (given("--depth")) b.chain.depth = depth;
                if (given("--tol")) b.chain.tol = tol;
                if (subsys) b.subsystem = subsys;
                cfg.chainrec = b;
                break;
            }
            case Command::Basin: {
                BasinBlock b = cfg.basin.value_or(BasinBlock{});
                if (given("--n")) {
                    if (n < 1) throw ConfigError("--n", "must be at least 1");
                    b.sample.n = n;
                }
                if (given("--horizon")) b.sample.horizon = horizon;
                if (given("--tol")) b.sample.tol = tol;
                if (subsys) b.subsystem = subsys;
                cfg.basin = b;
                break;
            }
            case Command::Certify:
                if (subsys) throw ConfigError("--subsystem", "certify always works on the whole cascade");
                break;
            case Command::ListExamples: break;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return run_command(cfg, cmd, out, err);
}

}  // namespace cascade::cli
