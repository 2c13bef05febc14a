#include <cascade/errors.hpp>
#include <cascade/random.hpp>
#include <cascade_cli/builtins.hpp>
#include <cascade_cli/commands.hpp>
#include <cascade_cli/config.hpp>
#include <cascade_cli/plot.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cascade;
using namespace cascade::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("cascade_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string config_error_path(const std::string& text) {
    try {
        (void)parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

int run(RunConfig cfg, Command cmd, const fs::path& out, std::string* err_text = nullptr) {
    cfg.output_dir = out.string();
    std::ostringstream log, err;
    int code = run_command(cfg, cmd, log, err);
    if (err_text) *err_text = err.str();
    return code;
}

int run_args(std::vector<const char*> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    args.insert(args.begin(), "cascade");
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(args.size()), args.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

// Every key the schema knows, populated.
const char* kFullConfig = R"J({
  "schema_version": 1,
  "system": {
    "name": "inline-cascade",
    "outer": {"variables": ["theta", "thetadot"], "factors": ["circle", "line"], "metric": [1, 0, 0, 1],
              "field": ["thetadot", "-(sin(theta)+thetadot)*cos(2*phi)"]},
    "inner": {"variables": ["phi", "phidot"], "factors": ["circle", "line"],
              "field": ["phidot", "-(sin(phi)+phidot)"], "equilibrium": [0, 0]},
    "lyapunov": "1-cos(theta)+thetadot^2/2",
    "region": [[-4, 4], [-4, 4]]
  },
  "seed": 17,
  "output_dir": "somewhere",
  "threads": 2,
  "simulate": {"subsystem": "full", "from": [[1, 2, 3, 4], [0.5, 0, 0, 0]], "t": 10, "tol": 1e-8,
               "sample_dt": 0.1, "record": "grid", "plot_axes": [0, 2]},
  "equilibria": {"subsystem": "outer", "region": [[-5, 5]], "grid_per_dim": 9, "newton_tol": 1e-11,
                 "max_iterations": 40, "hyperbolicity_tol": 1e-7},
  "chainrec": {"subsystem": "inner", "region": [[-3, 3]], "depth": 5, "rounds": 2, "T": 4, "epsilon": 0.2,
               "samples_per_box": 12, "tol": 1e-6, "grid_per_dim": 8, "plot_axes": [0, 1]},
  "basin": {"subsystem": "full", "region": [[-4, 4], [-4, 4]], "target": [0, 0, 0, 0], "n": 100,
            "horizon": 50, "conv_tol": 1e-3, "tol": 1e-8, "threshold": 0.9, "max_witnesses": 5},
  "certify": {
    "inner_region": [[-4, 4]], "outer_region": [[-4, 4]], "chain_region": [[-3, 3]],
    "certificate": {"W": "1-cos(theta)+thetadot^2/2", "alpha": "4*(1-cos(2*phi))", "beta": "0", "c": 4},
    "equilibria": {"grid_per_dim": 8},
    "chain": {"depth": 6, "rounds": 3},
    "gradient": {"n_traj": 50, "horizon": 40, "tol": 1e-10},
    "inner_basin": {"n": 1000, "threshold": 0.999},
    "outer_basin": {"n": 1000},
    "cascade_basin": {"n": 500, "horizon": 200, "threshold": 0.99},
    "growth": {"n_x": 10, "n_y": 10, "proposal_budget": 1000, "max_escalations": 2, "inner_horizon": 80,
               "slack": 1e-9, "tol": 1e-8},
    "comparison": {"trajectories": 3, "horizon": 100, "sample_dt": 0.1, "regression_points": false},
    "perturbation": 0.001, "rate_slack": 0.2, "witnesses_csv": true
  }
})J";

// Drops object members at random, keeping schema_version.
void prune(json& j, Rng& rng, bool top) {
    if (!j.is_object()) return;
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    for (const auto& k : keys) {
        const bool required = (top && k == "schema_version") || k == "variables" || k == "factors" ||
                              k == "field" || k == "outer" || k == "inner" || k == "name";
        if (!required && rng.uniform() < 0.3) {
            j.erase(k);
        } else {
            prune(j[k], rng, false);
        }
    }
}

}  // namespace

TEST(Config, MinimalBuiltin) {
    auto cfg = parse_config_text(R"J({"schema_version": 1, "system": "paper-example"})J");
    EXPECT_EQ(cfg.system_name, "paper-example");
    auto p = resolve_problem(cfg);
    EXPECT_TRUE(p.is_cascade());
    EXPECT_EQ(p.variables, (std::vector<std::string>{"theta", "thetadot", "phi", "phidot"}));
    ASSERT_TRUE(p.certificate.has_value());
    EXPECT_EQ(p.certificate->c, 4.0);
    EXPECT_EQ(p.regression_points.size(), 3u);
}

TEST(Config, ErrorsNameTheirPath) {
    EXPECT_EQ(config_error_path(R"J({"schema_version": 1, "chainrec": {"epsilonn": 0.1}})J"), "$.chainrec.epsilonn");
    EXPECT_EQ(config_error_path(R"J({"system": "pendulum"})J"), "$.schema_version");
    EXPECT_EQ(config_error_path(R"J({"schema_version": 2})J"), "$.schema_version");
    EXPECT_EQ(config_error_path(R"J({"schema_version": 1, "seed": "abc"})J"), "$.seed");
    EXPECT_EQ(config_error_path(R"J({"schema_version": 1, "basin": {"n": -3}})J"), "$.basin.n");
    EXPECT_EQ(config_error_path(R"J({"schema_version": 1, "certify": {"growth": {"nx": 3}}})J"), "$.certify.growth.nx");
    EXPECT_EQ(config_error_path(R"J({"schema_version": 1, "simulate": {"subsystem": "middle"}})J"), "$.simulate.subsystem");
    EXPECT_THROW((void)parse_config_text("{not json"), ConfigError);
}

TEST(Config, InlinePendulum) {
    auto cfg = parse_config_text(R"J({
      "schema_version": 1,
      "system": {"name": "my-pendulum",
                 "system": {"variables": ["phi", "phidot"], "factors": ["circle", "line"],
                            "field": ["phidot", "-(sin(phi)+phidot)"]}}
    })J");
    auto p = resolve_problem(cfg);
    EXPECT_FALSE(p.is_cascade());
    auto sys = p.full();
    auto ref = make_builtin("pendulum").full();
    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
        auto x = p.region.sample(rng);
        EXPECT_NEAR((sys.eval(x) - ref.eval(x)).norm(), 0.0, 1e-15);
    }
}

TEST(Config, InlineErrors) {
    auto bad_expr = parse_config_text(R"J({
      "schema_version": 1,
      "system": {"name": "bad", "system": {"variables": ["phi", "phidot"], "factors": ["circle", "line"],
                            "field": ["phidot", "-(sin(phi)+"]}}
    })J");
    try {
        (void)resolve_problem(bad_expr);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "$.system.system.field[1]");
    }
    auto unbound = parse_config_text(R"J({
      "schema_version": 1,
      "system": {"name": "unbound", "system": {"variables": ["q"], "factors": ["line"], "field": ["-z"]}}
    })J");
    EXPECT_THROW((void)resolve_problem(unbound), ConfigError);
    EXPECT_THROW((void)resolve_problem(parse_config_text(R"J({"schema_version": 1, "system": "nope"})J")), ConfigError);
}

TEST(Config, InlineCascadeMatchesBuiltin) {
    auto p = resolve_problem(parse_config_text(kFullConfig));
    ASSERT_TRUE(p.is_cascade());
    auto ref = make_builtin("paper-example");
    auto a = p.full();
    auto b = ref.full();
    Rng rng(2);
    for (int k = 0; k < 100; ++k) {
        auto z = ref.region.sample(rng);
        EXPECT_NEAR((a.eval(z) - b.eval(z)).norm(), 0.0, 1e-14);
        EXPECT_NEAR(p.certificate->alpha(p.cascade->inner_part(z)), ref.certificate->alpha(ref.cascade->inner_part(z)),
                    1e-14);
    }
}

TEST(Config, RoundTrip) {
    auto cfg = parse_config_text(kFullConfig);
    EXPECT_EQ(parse_config(serialize(cfg)), cfg);
    EXPECT_EQ(serialize(parse_config(serialize(cfg))), serialize(cfg));
}

TEST(ConfigProperty, RoundTripOnRandomSubsets) {
    const json full = json::parse(kFullConfig);
    Rng rng(3);
    int checked = 0;
    for (int k = 0; k < 300; ++k) {
        json doc = full;
        prune(doc, rng, true);
        RunConfig cfg;
        try {
            cfg = parse_config(doc);
        } catch (const ConfigError&) {
            // Pruning can drop a key that another one requires.
            continue;
        }
        ASSERT_EQ(parse_config(serialize(cfg)), cfg) << doc.dump();
        ++checked;
    }
    EXPECT_GE(checked, 200);
}

TEST(Builtins, NamesResolve) {
    for (const auto& name : builtin_names()) {
        auto p = make_builtin(name);
        EXPECT_EQ(p.name, name);
        auto sys = p.full();
        EXPECT_EQ(p.region.dim(), sys.dim());
        EXPECT_EQ(p.variables.size(), sys.dim());
        EXPECT_LT(sys.eval(p.target).norm(), 1e-12) << name;
    }
    EXPECT_THROW((void)make_builtin("missing"), InputError);
}

TEST(Commands, AtomicWrite) {
    auto dir = scratch("atomic");
    fs::create_directories(dir);
    write_file_atomic(dir / "a.txt", "hello\n");
    EXPECT_EQ(slurp(dir / "a.txt"), "hello\n");
    write_file_atomic(dir / "a.txt", "again\n");
    EXPECT_EQ(slurp(dir / "a.txt"), "again\n");
    EXPECT_FALSE(fs::exists(dir / "a.txt.tmp"));
    EXPECT_THROW(write_file_atomic(dir / "no" / "such" / "dir.txt", "x"), ResourceError);
}

TEST(Commands, EquilibriaWritesRecords) {
    auto out = scratch("equilibria");
    RunConfig cfg;
    cfg.system_name = "pendulum";
    ASSERT_EQ(run(cfg, Command::Equilibria, out), kExitPass);
    auto eqs = json::parse(slurp(out / "equilibria.json"));
    ASSERT_EQ(eqs.size(), 2u);
    EXPECT_EQ(eqs[0]["classification"], "Unstable(1)");
    EXPECT_EQ(eqs[1]["classification"], "Stable");
    EXPECT_EQ(parse_config_text(slurp(out / "config.json")).system_name, "pendulum");
}

TEST(Commands, ChainrecVerdicts) {
    RunConfig cfg;
    cfg.chainrec = ChainrecBlock{};
    cfg.chainrec->chain.depth = 5;
    cfg.system_name = "pendulum";
    auto pass_dir = scratch("chainrec_pass");
    EXPECT_EQ(run(cfg, Command::Chainrec, pass_dir), kExitPass);
    EXPECT_TRUE(fs::exists(pass_dir / "recurrent_boxes.csv"));
    EXPECT_TRUE(fs::exists(pass_dir / "recurrent_boxes.svg"));
    EXPECT_EQ(json::parse(slurp(pass_dir / "chainrec.json"))["verdict"], "PASS");

    cfg.system_name = "limit-cycle-outer";
    auto fail_dir = scratch("chainrec_fail");
    EXPECT_EQ(run(cfg, Command::Chainrec, fail_dir), kExitFail);
}

TEST(Commands, BasinLinear) {
    RunConfig cfg;
    cfg.system_name = "linear-decay";
    cfg.basin = BasinBlock{};
    cfg.basin->sample.n = 200;
    auto out = scratch("basin");
    ASSERT_EQ(run(cfg, Command::Basin, out), kExitPass);
    auto b = json::parse(slurp(out / "basin.json"));
    EXPECT_EQ(b["verdict"], "PASS");
}

TEST(Commands, SimulateWritesCsvAndSvg) {
    RunConfig cfg;
    cfg.system_name = "pendulum";
    cfg.simulate = SimulateBlock{};
    cfg.simulate->from = std::vector<std::vector<double>>{{3.0, 0.0}, {-2.0, 1.0}};
    cfg.simulate->t = 20.0;
    auto out = scratch("simulate");
    ASSERT_EQ(run(cfg, Command::Simulate, out), kExitPass);
    EXPECT_TRUE(fs::exists(out / "trajectory_0.csv"));
    EXPECT_TRUE(fs::exists(out / "trajectory_1.csv"));
    auto csv = slurp(out / "trajectory_0.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,coord_0,coord_1");
    EXPECT_NE(slurp(out / "trajectories.svg").find("<polyline"), std::string::npos);
}

TEST(Commands, UsageErrors) {
    RunConfig cfg;
    cfg.system_name = "pendulum";
    std::string err;
    EXPECT_EQ(run(cfg, Command::Certify, scratch("usage1"), &err), kExitUsage);
    EXPECT_NE(err.find("cascade"), std::string::npos);
    cfg.system_name = "no-such-system";
    EXPECT_EQ(run(cfg, Command::Equilibria, scratch("usage2")), kExitUsage);
    cfg.system_name = "pendulum";
    cfg.simulate = SimulateBlock{};
    cfg.simulate->from = std::vector<std::vector<double>>{{1.0, 2.0, 3.0}};
    EXPECT_EQ(run(cfg, Command::Simulate, scratch("usage3")), kExitUsage);
}

TEST(Commands, InconclusiveExitCode) {
    // A certificate level no sampled state reaches starves the growth sampler.
    auto cfg = parse_config_text(R"J({
      "schema_version": 1, "system": "paper-example",
      "certify": {"certificate": {"c": 1000},
                  "growth": {"n_x": 10, "n_y": 10, "proposal_budget": 200, "max_escalations": 0},
                  "chain": {"depth": 4},
                  "inner_basin": {"n": 200}, "outer_basin": {"n": 200}, "cascade_basin": {"n": 50},
                  "gradient": {"n_traj": 10}, "comparison": {"trajectories": 2}}
    })J");
    auto out = scratch("inconclusive");
    EXPECT_EQ(run(cfg, Command::Certify, out), kExitInconclusive);
    auto report = json::parse(slurp(out / "report.json"));
    EXPECT_EQ(report["overall"], "INCONCLUSIVE");
    EXPECT_TRUE(fs::exists(out / "witnesses.csv"));
}

TEST(Cli, ExitCodes) {
    std::string out;
    EXPECT_EQ(run_args({"list-examples"}, &out), kExitPass);
    EXPECT_NE(out.find("paper-example"), std::string::npos);
    EXPECT_EQ(run_args({}), kExitUsage);
    EXPECT_EQ(run_args({"frobnicate"}), kExitUsage);
    EXPECT_EQ(run_args({"equilibria", "nope"}), kExitUsage);
    EXPECT_EQ(run_args({"simulate", "pendulum", "--from", "1,x"}), kExitUsage);
    EXPECT_EQ(run_args({"basin", "pendulum", "--n", "0"}), kExitUsage);
    EXPECT_EQ(run_args({"equilibria", "pendulum", "--config", "/nonexistent/config.json"}), kExitUsage);

    auto dir = scratch("cli_eq");
    EXPECT_EQ(run_args({"equilibria", "gradient-circle", "--out", dir.c_str()}), kExitPass);
    EXPECT_TRUE(fs::exists(dir / "equilibria.json"));
}

TEST(Cli, ConfigFileAndOverrides) {
    auto dir = scratch("cli_cfg");
    fs::create_directories(dir);
    auto cfg_path = dir / "run.json";
    std::ofstream(cfg_path) << R"J({"schema_version": 1, "system": "linear-decay", "seed": 3, "basin": {"n": 50}})J";
    auto out = dir / "out";
    EXPECT_EQ(run_args({"basin", "--config", cfg_path.c_str(), "--out", out.c_str(), "--seed", "9"}), kExitPass);
    auto eff = parse_config_text(slurp(out / "config.json"));
    EXPECT_EQ(eff.seed, 9u);
    EXPECT_EQ(eff.basin->sample.n, 50u);

    std::ofstream(dir / "bad.json") << R"J({"schema_version": 1, "chainrec": {"epsilonn": 1}})J";
    std::string err;
    auto bad = dir / "bad.json";
    EXPECT_EQ(run_args({"chainrec", "pendulum", "--config", bad.c_str()}, nullptr, &err), kExitUsage);
    EXPECT_NE(err.find("$.chainrec.epsilonn"), std::string::npos);
}

TEST(Plot, FrameValidation) {
    auto region = RegionSpec::symmetric(SpaceSpec({FactorKind::Circle, FactorKind::Line}), 3.0);
    EXPECT_THROW((void)make_frame(region, 0, 0, {"a", "b"}), InputError);
    EXPECT_THROW((void)make_frame(region, 0, 2, {"a", "b"}), InputError);
    auto f = make_frame(region, 0, 1, {"phi", "phidot"});
    EXPECT_TRUE(f.x_circle);
    EXPECT_FALSE(f.y_circle);
    EXPECT_EQ(f.y_range.hi, 3.0);
}

TEST(Plot, TrajectorySvg) {
    SpaceSpec s({FactorKind::Circle, FactorKind::Line});
    auto region = RegionSpec::symmetric(s, 3.0);
    auto frame = make_frame(region, 0, 1, {"phi", "phidot"});

    auto empty = trajectory_svg({}, frame);
    EXPECT_NE(empty.find("<svg"), std::string::npos);
    EXPECT_EQ(empty.find("<polyline"), std::string::npos);

    // theta' = 1 crosses the cut at pi once in t < 4 from 0.
    SystemDef spin(s, [](const PointCoords&, TangentCoords& out) {
        out[0] = 1.0;
        out[1] = 0.0;
    });
    PointCoords p0(2);
    p0 << 0.0, 0.5;
    auto traj = flow(spin, p0, 4.0, {.tol = 1e-9, .record = Record::Grid, .sample_dt = 0.1});
    auto svg = trajectory_svg({traj}, frame);
    std::size_t lines = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
    EXPECT_EQ(lines, 2u);
    EXPECT_EQ(svg, trajectory_svg({traj}, frame));
}

TEST(Plot, BoxesSvg) {
    auto region = RegionSpec::symmetric(SpaceSpec({FactorKind::Circle, FactorKind::Line}), 3.0);
    auto cover = build_cover(region, 2);
    auto frame = make_frame(region, 0, 1, {"a", "b"});
    PointCoords eq = PointCoords::Zero(2);
    auto svg = boxes_svg(cover, {0, 5, 7}, {eq}, frame);
    std::size_t rects = 0;
    for (auto pos = svg.find("<rect"); pos != std::string::npos; pos = svg.find("<rect", pos + 1)) ++rects;
    EXPECT_GE(rects, 3u);
    EXPECT_NE(svg.find("<circle"), std::string::npos);
}
