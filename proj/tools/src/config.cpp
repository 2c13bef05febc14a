#include "cascade_cli/config.hpp"

#include <cascade/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cascade::cli {

namespace {

using json = nlohmann::json;

std::string type_name(const json& j) { return j.type_name(); }

[[noreturn]] void fail(const std::string& path, const std::string& message) { throw ConfigError(path, message); }

// --- scalar and list conversions -------------------------------------------

void convert(const json& j, const std::string& path, double& out) {
    if (!j.is_number()) {
        fail(path, "expected a number, got " + type_name(j));
    }
    out = j.get<double>();
    if (!std::isfinite(out)) {
        fail(path, "expected a finite number");
    }
}

void convert(const json& j, const std::string& path, int& out) {
    if (!j.is_number_integer()) {
        fail(path, "expected an integer, got " + type_name(j));
    }
    const auto v = j.get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        fail(path, "integer out of range");
    }
    out = static_cast<int>(v);
}

template <class U>
void convert_unsigned(const json& j, const std::string& path, U& out) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
        fail(path, "expected a non-negative integer, got " + (j.is_number() ? j.dump() : type_name(j)));
    }
    const auto v = j.get<std::uint64_t>();
    if (v > std::numeric_limits<U>::max()) {
        fail(path, "integer out of range");
    }
    out = static_cast<U>(v);
}

void convert(const json& j, const std::string& path, unsigned& out) { convert_unsigned(j, path, out); }
void convert(const json& j, const std::string& path, unsigned long& out) { convert_unsigned(j, path, out); }

void convert(const json& j, const std::string& path, bool& out) {
    if (!j.is_boolean()) {
        fail(path, "expected true or false, got " + type_name(j));
    }
    out = j.get<bool>();
}

void convert(const json& j, const std::string& path, std::string& out) {
    if (!j.is_string()) {
        fail(path, "expected a string, got " + type_name(j));
    }
    out = j.get<std::string>();
}

void convert(const json& j, const std::string& path, Interval& out) {
    if (!j.is_array() || j.size() != 2) {
        fail(path, "expected [lo, hi]");
    }
    double pair[2];
    convert(j[0], path + "[0]", pair[0]);
    convert(j[1], path + "[1]", pair[1]);
    if (!(pair[0] < pair[1])) {
        fail(path, "expected lo < hi");
    }
    out = {pair[0], pair[1]};
}

template <class T>
void convert(const json& j, const std::string& path, std::vector<T>& out) {
    if (!j.is_array()) {
        fail(path, "expected an array, got " + type_name(j));
    }
    out.clear();
    out.resize(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        convert(j[i], path + "[" + std::to_string(i) + "]", out[i]);
    }
}

json to_json_value(const Interval& b) { return json::array({b.lo, b.hi}); }

template <class T>
json to_json_value(const T& v) {
    return json(v);
}

template <class T>
json to_json_value(const std::vector<T>& v) {
    json out = json::array();
    for (const auto& x : v) {
        out.push_back(to_json_value(x));
    }
    return out;
}

// --- object reader ------------------------------------------------------------

class Reader {
public:
    Reader(const json& j, std::string path, std::initializer_list<std::string_view> allowed)
        : j_(j), path_(std::move(path)) {
        if (!j.is_object()) {
            fail(path_, "expected an object, got " + type_name(j));
        }
        for (const auto& item : j.items()) {
            if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
                fail(at(item.key()), "unknown key");
            }
        }
    }

    [[nodiscard]] std::string at(std::string_view key) const { return path_ + "." + std::string(key); }
    [[nodiscard]] bool has(std::string_view key) const { return j_.contains(key); }
    [[nodiscard]] const json& raw(std::string_view key) const { return j_.at(std::string(key)); }

    template <class T>
    void get(std::string_view key, std::optional<T>& out) const {
        if (const auto it = j_.find(key); it != j_.end()) {
            T value{};
            convert(*it, at(key), value);
            out = std::move(value);
        }
    }

    template <class T>
    void require(std::string_view key, T& out) const {
        if (!has(key)) {
            fail(at(key), "required key missing");
        }
        convert(raw(key), at(key), out);
    }

private:
    const json& j_;
    std::string path_;
};

template <class T>
void put(json& j, const char* key, const std::optional<T>& v) {
    if (v) {
        j[key] = to_json_value(*v);
    }
}

// --- blocks -------------------------------------------------------------------

#define SEARCH_KEYS "grid_per_dim", "newton_tol", "max_iterations", "hyperbolicity_tol"
#define CHAIN_KEYS "depth", "rounds", "T", "epsilon", "samples_per_box", "tol"
#define SAMPLE_KEYS "n", "horizon", "conv_tol", "tol", "threshold"

void read_keys(const Reader& r, SearchKeys& s) {
    r.get("grid_per_dim", s.grid_per_dim);
    r.get("newton_tol", s.newton_tol);
    r.get("max_iterations", s.max_iterations);
    r.get("hyperbolicity_tol", s.hyperbolicity_tol);
    if (s.grid_per_dim && *s.grid_per_dim < 2) {
        fail(r.at("grid_per_dim"), "must be at least 2");
    }
}

void write_keys(json& j, const SearchKeys& s) {
    put(j, "grid_per_dim", s.grid_per_dim);
    put(j, "newton_tol", s.newton_tol);
    put(j, "max_iterations", s.max_iterations);
    put(j, "hyperbolicity_tol", s.hyperbolicity_tol);
}

void read_keys(const Reader& r, ChainKeys& c) {
    r.get("depth", c.depth);
    r.get("rounds", c.rounds);
    r.get("T", c.T);
    r.get("epsilon", c.epsilon);
    r.get("samples_per_box", c.samples_per_box);
    r.get("tol", c.tol);
    if (c.depth && (*c.depth < 0 || *c.depth > 24)) {
        fail(r.at("depth"), "must be between 0 and 24");
    }
    if (c.rounds && *c.rounds < 1) {
        fail(r.at("rounds"), "must be at least 1");
    }
}

void write_keys(json& j, const ChainKeys& c) {
    put(j, "depth", c.depth);
    put(j, "rounds", c.rounds);
    put(j, "T", c.T);
    put(j, "epsilon", c.epsilon);
    put(j, "samples_per_box", c.samples_per_box);
    put(j, "tol", c.tol);
}

void read_keys(const Reader& r, SampleKeys& s) {
    r.get("n", s.n);
    r.get("horizon", s.horizon);
    r.get("conv_tol", s.conv_tol);
    r.get("tol", s.tol);
    r.get("threshold", s.threshold);
    if (s.n && *s.n < 1) {
        fail(r.at("n"), "must be at least 1");
    }
    if (s.threshold && (*s.threshold < 0.0 || *s.threshold > 1.0)) {
        fail(r.at("threshold"), "must lie in [0, 1]");
    }
}

void write_keys(json& j, const SampleKeys& s) {
    put(j, "n", s.n);
    put(j, "horizon", s.horizon);
    put(j, "conv_tol", s.conv_tol);
    put(j, "tol", s.tol);
    put(j, "threshold", s.threshold);
}

void check_subsystem(const Reader& r, const std::optional<std::string>& s) {
    if (s && *s != "full" && *s != "outer" && *s != "inner") {
        fail(r.at("subsystem"), "expected \"full\", \"outer\" or \"inner\"");
    }
}

FieldDef read_field(const json& j, const std::string& path) {
    const Reader r(j, path, {"variables", "factors", "metric", "field", "equilibrium"});
    FieldDef f;
    r.require("variables", f.variables);
    r.require("factors", f.factors);
    r.get("metric", f.metric);
    r.require("field", f.field);
    r.get("equilibrium", f.equilibrium);
    const std::size_t n = f.factors.size();
    if (n == 0) {
        fail(r.at("factors"), "at least one factor is required");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (f.factors[i] != "circle" && f.factors[i] != "line") {
            fail(r.at("factors") + "[" + std::to_string(i) + "]", "expected \"circle\" or \"line\"");
        }
    }
    if (f.variables.size() != n) {
        fail(r.at("variables"), "expected " + std::to_string(n) + " names, one per factor");
    }
    if (f.field.size() != n) {
        fail(r.at("field"), "expected " + std::to_string(n) + " expressions, one per factor");
    }
    if (f.metric && f.metric->size() != n * n) {
        fail(r.at("metric"), "expected " + std::to_string(n * n) + " entries (row-major)");
    }
    if (f.equilibrium && f.equilibrium->size() != n) {
        fail(r.at("equilibrium"), "expected " + std::to_string(n) + " coordinates");
    }
    return f;
}

json write_field(const FieldDef& f) {
    json j = {{"variables", f.variables}, {"factors", f.factors}, {"field", f.field}};
    put(j, "metric", f.metric);
    put(j, "equilibrium", f.equilibrium);
    return j;
}

InlineSystem read_inline(const json& j, const std::string& path) {
    const Reader r(j, path, {"name", "system", "outer", "inner", "lyapunov", "region"});
    InlineSystem s;
    r.require("name", s.name);
    if (r.has("system")) {
        if (r.has("outer") || r.has("inner")) {
            fail(r.at("system"), "give either \"system\" or \"outer\" + \"inner\", not both");
        }
        s.system = read_field(r.raw("system"), r.at("system"));
    } else {
        if (!r.has("outer")) {
            fail(r.at("outer"), "required key missing (or give \"system\")");
        }
        if (!r.has("inner")) {
            fail(r.at("inner"), "required key missing");
        }
        s.outer = read_field(r.raw("outer"), r.at("outer"));
        s.inner = read_field(r.raw("inner"), r.at("inner"));
        if (s.outer->equilibrium) {
            fail(r.at("outer") + ".equilibrium", "only the inner loop takes an equilibrium");
        }
    }
    r.get("lyapunov", s.lyapunov);
    r.get("region", s.region);
    return s;
}

json write_inline(const InlineSystem& s) {
    json j = {{"name", s.name}};
    if (s.system) j["system"] = write_field(*s.system);
    if (s.outer) j["outer"] = write_field(*s.outer);
    if (s.inner) j["inner"] = write_field(*s.inner);
    put(j, "lyapunov", s.lyapunov);
    put(j, "region", s.region);
    return j;
}

SimulateBlock read_simulate(const json& j, const std::string& path) {
    const Reader r(j, path, {"subsystem", "from", "t", "tol", "sample_dt", "record", "plot_axes"});
    SimulateBlock b;
    r.get("subsystem", b.subsystem);
    check_subsystem(r, b.subsystem);
    if (r.has("from")) {
        const json& from = r.raw("from");
        if (from.is_array() && !from.empty() && from.front().is_number()) {
            std::vector<double> single;
            convert(from, r.at("from"), single);
            b.from = std::vector<std::vector<double>>{single};
        } else {
            std::vector<std::vector<double>> many;
            convert(from, r.at("from"), many);
            b.from = many;
        }
    }
    r.get("t", b.t);
    r.get("tol", b.tol);
    r.get("sample_dt", b.sample_dt);
    r.get("record", b.record);
    r.get("plot_axes", b.plot_axes);
    if (b.t && !(*b.t > 0.0)) fail(r.at("t"), "must be positive");
    if (b.tol && !(*b.tol > 0.0)) fail(r.at("tol"), "must be positive");
    if (b.sample_dt && !(*b.sample_dt > 0.0)) fail(r.at("sample_dt"), "must be positive");
    if (b.record && *b.record != "steps" && *b.record != "grid" && *b.record != "final") {
        fail(r.at("record"), "expected \"steps\", \"grid\" or \"final\"");
    }
    if (b.plot_axes && b.plot_axes->size() != 2) fail(r.at("plot_axes"), "expected two axis indices");
    return b;
}

json write_simulate(const SimulateBlock& b) {
    json j = json::object();
    put(j, "subsystem", b.subsystem);
    put(j, "from", b.from);
    put(j, "t", b.t);
    put(j, "tol", b.tol);
    put(j, "sample_dt", b.sample_dt);
    put(j, "record", b.record);
    put(j, "plot_axes", b.plot_axes);
    return j;
}

EquilibriaBlock read_equilibria(const json& j, const std::string& path) {
    const Reader r(j, path, {"subsystem", "region", SEARCH_KEYS});
    EquilibriaBlock b;
    r.get("subsystem", b.subsystem);
    check_subsystem(r, b.subsystem);
    r.get("region", b.region);
    read_keys(r, b.search);
    return b;
}

json write_equilibria(const EquilibriaBlock& b) {
    json j = json::object();
    put(j, "subsystem", b.subsystem);
    put(j, "region", b.region);
    write_keys(j, b.search);
    return j;
}

ChainrecBlock read_chainrec(const json& j, const std::string& path) {
    const Reader r(j, path, {"subsystem", "region", "plot_axes", CHAIN_KEYS, SEARCH_KEYS});
    ChainrecBlock b;
    r.get("subsystem", b.subsystem);
    check_subsystem(r, b.subsystem);
    r.get("region", b.region);
    read_keys(r, b.chain);
    read_keys(r, b.search);
    r.get("plot_axes", b.plot_axes);
    if (b.plot_axes && b.plot_axes->size() != 2) fail(r.at("plot_axes"), "expected two axis indices");
    return b;
}

json write_chainrec(const ChainrecBlock& b) {
    json j = json::object();
    put(j, "subsystem", b.subsystem);
    put(j, "region", b.region);
    write_keys(j, b.chain);
    write_keys(j, b.search);
    put(j, "plot_axes", b.plot_axes);
    return j;
}

BasinBlock read_basin(const json& j, const std::string& path) {
    const Reader r(j, path, {"subsystem", "region", "target", "max_witnesses", SAMPLE_KEYS});
    BasinBlock b;
    r.get("subsystem", b.subsystem);
    check_subsystem(r, b.subsystem);
    r.get("region", b.region);
    r.get("target", b.target);
    read_keys(r, b.sample);
    r.get("max_witnesses", b.max_witnesses);
    return b;
}

json write_basin(const BasinBlock& b) {
    json j = json::object();
    put(j, "subsystem", b.subsystem);
    put(j, "region", b.region);
    put(j, "target", b.target);
    write_keys(j, b.sample);
    put(j, "max_witnesses", b.max_witnesses);
    return j;
}

void read_keys(const Reader& r, GradientKeys& g) {
    r.get("n_traj", g.n_traj);
    r.get("horizon", g.horizon);
    r.get("tol", g.tol);
}

void write_keys(json& j, const GradientKeys& g) {
    put(j, "n_traj", g.n_traj);
    put(j, "horizon", g.horizon);
    put(j, "tol", g.tol);
}

void read_keys(const Reader& r, GrowthKeys& g) {
    r.get("n_x", g.n_x);
    r.get("n_y", g.n_y);
    r.get("proposal_budget", g.proposal_budget);
    r.get("max_escalations", g.max_escalations);
    r.get("inner_horizon", g.inner_horizon);
    r.get("slack", g.slack);
    r.get("tol", g.tol);
}

void write_keys(json& j, const GrowthKeys& g) {
    put(j, "n_x", g.n_x);
    put(j, "n_y", g.n_y);
    put(j, "proposal_budget", g.proposal_budget);
    put(j, "max_escalations", g.max_escalations);
    put(j, "inner_horizon", g.inner_horizon);
    put(j, "slack", g.slack);
    put(j, "tol", g.tol);
}

void read_keys(const Reader& r, ComparisonKeys& c) {
    r.get("trajectories", c.trajectories);
    r.get("horizon", c.horizon);
    r.get("sample_dt", c.sample_dt);
    r.get("regression_points", c.regression_points);
}

void write_keys(json& j, const ComparisonKeys& c) {
    put(j, "trajectories", c.trajectories);
    put(j, "horizon", c.horizon);
    put(j, "sample_dt", c.sample_dt);
    put(j, "regression_points", c.regression_points);
}

void read_keys(const Reader& r, CertificateDef& c) {
    r.get("W", c.W);
    r.get("alpha", c.alpha);
    r.get("beta", c.beta);
    r.get("c", c.c);
}

void write_keys(json& j, const CertificateDef& c) {
    put(j, "W", c.W);
    put(j, "alpha", c.alpha);
    put(j, "beta", c.beta);
    put(j, "c", c.c);
}

template <class Keys>
std::optional<Keys> read_sub(const Reader& parent, std::string_view key, std::initializer_list<std::string_view> allowed) {
    if (!parent.has(key)) {
        return std::nullopt;
    }
    const Reader r(parent.raw(key), parent.at(key), allowed);
    Keys k;
    read_keys(r, k);
    return k;
}

template <class Keys>
void write_sub(json& j, const char* key, const std::optional<Keys>& k) {
    if (k) {
        json sub = json::object();
        write_keys(sub, *k);
        j[key] = sub;
    }
}

CertifyBlock read_certify(const json& j, const std::string& path) {
    const Reader r(j, path,
                   {"inner_region", "outer_region", "chain_region", "certificate", "equilibria", "chain", "gradient",
                    "inner_basin", "outer_basin", "cascade_basin", "growth", "comparison", "perturbation",
                    "rate_slack", "witnesses_csv"});
    CertifyBlock b;
    r.get("inner_region", b.inner_region);
    r.get("outer_region", b.outer_region);
    r.get("chain_region", b.chain_region);
    b.certificate = read_sub<CertificateDef>(r, "certificate", {"W", "alpha", "beta", "c"});
    b.equilibria = read_sub<SearchKeys>(r, "equilibria", {SEARCH_KEYS});
    b.chain = read_sub<ChainKeys>(r, "chain", {CHAIN_KEYS});
    b.gradient = read_sub<GradientKeys>(r, "gradient", {"n_traj", "horizon", "tol"});
    b.inner_basin = read_sub<SampleKeys>(r, "inner_basin", {SAMPLE_KEYS});
    b.outer_basin = read_sub<SampleKeys>(r, "outer_basin", {SAMPLE_KEYS});
    b.cascade_basin = read_sub<SampleKeys>(r, "cascade_basin", {SAMPLE_KEYS});
    b.growth = read_sub<GrowthKeys>(
        r, "growth", {"n_x", "n_y", "proposal_budget", "max_escalations", "inner_horizon", "slack", "tol"});
    b.comparison =
        read_sub<ComparisonKeys>(r, "comparison", {"trajectories", "horizon", "sample_dt", "regression_points"});
    r.get("perturbation", b.perturbation);
    r.get("rate_slack", b.rate_slack);
    r.get("witnesses_csv", b.witnesses_csv);
    return b;
}

json write_certify(const CertifyBlock& b) {
    json j = json::object();
    put(j, "inner_region", b.inner_region);
    put(j, "outer_region", b.outer_region);
    put(j, "chain_region", b.chain_region);
    write_sub(j, "certificate", b.certificate);
    write_sub(j, "equilibria", b.equilibria);
    write_sub(j, "chain", b.chain);
    write_sub(j, "gradient", b.gradient);
    write_sub(j, "inner_basin", b.inner_basin);
    write_sub(j, "outer_basin", b.outer_basin);
    write_sub(j, "cascade_basin", b.cascade_basin);
    write_sub(j, "growth", b.growth);
    write_sub(j, "comparison", b.comparison);
    put(j, "perturbation", b.perturbation);
    put(j, "rate_slack", b.rate_slack);
    put(j, "witnesses_csv", b.witnesses_csv);
    return j;
}

#undef SEARCH_KEYS
#undef CHAIN_KEYS
#undef SAMPLE_KEYS

}  // namespace

RunConfig parse_config(const json& doc) {
    const Reader r(doc, "$",
                   {"schema_version", "system", "seed", "output_dir", "threads", "simulate", "equilibria", "chainrec",
                    "basin", "certify"});
    RunConfig cfg;
    r.require("schema_version", cfg.schema_version);
    if (cfg.schema_version != kSchemaVersion) {
        fail(r.at("schema_version"), "unsupported version " + std::to_string(cfg.schema_version) + " (expected " +
                                         std::to_string(kSchemaVersion) + ")");
    }
    if (r.has("system")) {
        const json& s = r.raw("system");
        if (s.is_string()) {
            cfg.system_name = s.get<std::string>();
        } else if (s.is_object()) {
            cfg.system_inline = read_inline(s, r.at("system"));
        } else {
            fail(r.at("system"), "expected a built-in name or an inline definition object");
        }
    }
    r.get("seed", cfg.seed);
    r.get("output_dir", cfg.output_dir);
    r.get("threads", cfg.threads);
    if (r.has("simulate")) cfg.simulate = read_simulate(r.raw("simulate"), r.at("simulate"));
    if (r.has("equilibria")) cfg.equilibria = read_equilibria(r.raw("equilibria"), r.at("equilibria"));
    if (r.has("chainrec")) cfg.chainrec = read_chainrec(r.raw("chainrec"), r.at("chainrec"));
    if (r.has("basin")) cfg.basin = read_basin(r.raw("basin"), r.at("basin"));
    if (r.has("certify")) cfg.certify = read_certify(r.raw("certify"), r.at("certify"));
    return cfg;
}

RunConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("$", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc);
}

json serialize(const RunConfig& cfg) {
    json j = {{"schema_version", cfg.schema_version}};
    if (cfg.system_name) j["system"] = *cfg.system_name;
    if (cfg.system_inline) j["system"] = write_inline(*cfg.system_inline);
    put(j, "seed", cfg.seed);
    put(j, "output_dir", cfg.output_dir);
    put(j, "threads", cfg.threads);
    if (cfg.simulate) j["simulate"] = write_simulate(*cfg.simulate);
    if (cfg.equilibria) j["equilibria"] = write_equilibria(*cfg.equilibria);
    if (cfg.chainrec) j["chainrec"] = write_chainrec(*cfg.chainrec);
    if (cfg.basin) j["basin"] = write_basin(*cfg.basin);
    if (cfg.certify) j["certify"] = write_certify(*cfg.certify);
    return j;
}

}  // namespace cascade::cli
