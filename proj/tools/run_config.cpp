#include "run_config.hpp"

#include "fracdiff/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace fracdiff::cli {

using nlohmann::json;

std::vector<double> AxisSpec::values() const
{
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return out;
}

std::vector<std::string> preset_names()
{
    return {"unit", "scaled_lambda1_eq_1", "variable_diffusivity"};
}

json preset_defaults(const std::string& name)
{
    json doc = {
        {"version", kConfigVersion},
        {"preset", name},
        {"operator",
         {{"length", 1.0},
          {"mesh_points", 63},
          {"diffusivity", {{"kind", "constant"}, {"value", 1.0}}},
          {"potential", {{"kind", "constant"}, {"value", 0.0}}}}},
        {"problem",
         {{"alpha", 0.5},
          {"beta", 0.5},
          {"initial", {{"kind", "parabola"}, {"scale", 1.0}}},
          {"times", {{"kind", "geometric"}, {"t_lo", 0.1}, {"t_hi", 1e4}, {"count", 200}}}}},
        {"observation", {{"kind", "pointwise"}, {"sensor", 31}, {"weight", "uniform"}}},
        {"noise", {{"level", 0.0}, {"seed", 0}}},
        {"recovery",
         {{"window_decades", 1.0},
          {"window_step_decades", 0.25},
          {"max_second_share", 0.2},
          {"moment_orders", 3},
          {"condition_limit", 1e8},
          {"landscape",
           {{"alpha", {{"lo", 0.02}, {"hi", 1.98}, {"count", 50}}},
            {"beta", {{"lo", 0.01}, {"hi", 0.99}, {"count", 50}}}}}}},
        {"output", {{"directory", "out"}}},
    };
    if (name == "unit") {
        return doc;
    }
    if (name == "scaled_lambda1_eq_1") {
        doc["operator"]["diffusivity"] = {{"kind", "scaled"}, {"value", 1.0}};
        doc["problem"]["initial"] = {{"kind", "eigenmode"}, {"index", 1}, {"scale", 1.0}};
        return doc;
    }
    if (name == "variable_diffusivity") {
        doc["operator"]["diffusivity"] = {{"kind", "linear"}, {"value", 1.0}, {"slope", 1.0}};
        doc["operator"]["potential"] = {{"kind", "constant"}, {"value", -1.0}};
        return doc;
    }
    throw ConfigError("config /preset: unknown preset '" + name + "'");
}

namespace {

class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

    void allow(std::initializer_list<const char*> keys) const
    {
        if (!node_.is_object()) {
            fail("", "expected an object");
        }
        const std::set<std::string> known(keys.begin(), keys.end());
        for (const auto& [key, value] : node_.items()) {
            if (!known.contains(key)) {
                fail("/" + key, "unknown key");
            }
        }
    }

    Reader child(const std::string& key) const
    {
        return {require(key), path_ + "/" + key};
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    double number(const std::string& key) const
    {
        const json& v = require(key);
        if (!v.is_number()) {
            fail("/" + key, "expected a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail("/" + key, "must be finite");
        }
        return x;
    }

    double number_in(const std::string& key, double lo, double hi, bool open) const
    {
        const double x = number(key);
        const bool ok = open ? (x > lo && x < hi) : (x >= lo && x <= hi);
        if (!ok) {
            std::ostringstream msg;
            msg << "must lie in " << (open ? "(" : "[") << lo << ", " << hi << (open ? ")" : "]");
            fail("/" + key, msg.str());
        }
        return x;
    }

    std::uint64_t unsigned_int(const std::string& key, std::uint64_t lo, std::uint64_t hi) const
    {
        const json& v = require(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            fail("/" + key, "expected a non-negative integer");
        }
        const auto x = v.get<std::uint64_t>();
        if (x < lo || x > hi) {
            fail("/" + key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
        return x;
    }

    std::string choice(const std::string& key, std::initializer_list<const char*> options) const
    {
        const json& v = require(key);
        if (!v.is_string()) {
            fail("/" + key, "expected a string");
        }
        const auto s = v.get<std::string>();
        for (const char* o : options) {
            if (s == o) {
                return s;
            }
        }
        fail("/" + key, "unsupported value '" + s + "'");
    }

    std::string text(const std::string& key) const
    {
        const json& v = require(key);
        if (!v.is_string() || v.get<std::string>().empty()) {
            fail("/" + key, "expected a non-empty string");
        }
        return v.get<std::string>();
    }

    [[noreturn]] void fail(const std::string& suffix, const std::string& what) const
    {
        const std::string where = path_ + suffix;
        throw ConfigError("config " + (where.empty() ? std::string("/") : where) + ": " + what);
    }

    const json& node() const { return node_; }
    const std::string& path() const { return path_; }

private:
    const json& require(const std::string& key) const
    {
        if (!node_.contains(key)) {
            fail("/" + key, "missing");
        }
        return node_.at(key);
    }

    const json& node_;
    std::string path_;
};

CoefficientSpec read_coefficient(const Reader& r, bool allow_scaled)
{
    CoefficientSpec c;
    c.kind = allow_scaled ? r.choice("kind", {"constant", "linear", "scaled"}) : r.choice("kind", {"constant", "linear"});
    // Keys of other kinds may linger after merging over a preset; they are ignored.
    r.allow({"kind", "value", "slope"});
    if (c.kind == "linear") {
        c.slope = r.number("slope");
    }
    c.value = r.number("value");
    if (c.kind == "scaled" && !(c.value > 0.0)) {
        r.fail("/value", "target eigenvalue must be positive");
    }
    return c;
}

AxisSpec read_axis(const Reader& r, double lo, double hi)
{
    r.allow({"lo", "hi", "count"});
    AxisSpec a{r.number_in("lo", lo, hi, true), r.number_in("hi", lo, hi, true),
               static_cast<std::size_t>(r.unsigned_int("count", 1, 1000))};
    if (a.hi < a.lo) {
        r.fail("/hi", "must not be below lo");
    }
    return a;
}

RunConfig read(const json& doc)
{
    RunConfig c;
    const Reader root(doc, "");
    root.allow({"version", "preset", "operator", "problem", "observation", "noise", "recovery", "output"});
    if (root.unsigned_int("version", 0, 1000) != static_cast<std::uint64_t>(kConfigVersion)) {
        root.fail("/version", "unsupported version (expected " + std::to_string(kConfigVersion) + ")");
    }
    c.preset = root.text("preset");

    const Reader op = root.child("operator");
    op.allow({"length", "mesh_points", "diffusivity", "potential"});
    c.length = op.number_in("length", 0.0, 1e6, true);
    c.mesh_points = static_cast<std::size_t>(op.unsigned_int("mesh_points", 3, 4000));
    c.diffusivity = read_coefficient(op.child("diffusivity"), true);
    c.potential = read_coefficient(op.child("potential"), false);

    const Reader pr = root.child("problem");
    pr.allow({"alpha", "beta", "initial", "times"});
    c.alpha = pr.number_in("alpha", 0.0, 2.0, true);
    if (c.alpha == 1.0) {
        pr.fail("/alpha", "alpha = 1 is excluded");
    }
    c.beta = pr.number_in("beta", 0.0, 1.0, true);
    const Reader init = pr.child("initial");
    c.initial.kind = init.choice("kind", {"parabola", "eigenmode"});
    init.allow({"kind", "index", "scale"});
    if (c.initial.kind == "eigenmode") {
        c.initial.index = static_cast<std::size_t>(init.unsigned_int("index", 1, c.mesh_points));
    }
    c.initial.scale = init.number("scale");
    if (c.initial.scale == 0.0) {
        init.fail("/scale", "must be nonzero");
    }
    const Reader tg = pr.child("times");
    tg.allow({"kind", "t_lo", "t_hi", "count"});
    c.times.kind = tg.choice("kind", {"geometric", "linear"});
    c.times.t_lo = tg.number_in("t_lo", 0.0, 1e12, true);
    c.times.t_hi = tg.number_in("t_hi", 0.0, 1e12, true);
    c.times.count = static_cast<std::size_t>(tg.unsigned_int("count", 1, 1000000));
    if (!(c.times.t_hi > c.times.t_lo) && c.times.count > 1) {
        tg.fail("/t_hi", "must exceed t_lo");
    }

    const Reader ob = root.child("observation");
    c.observation = ob.choice("kind", {"pointwise", "weighted"});
    ob.allow({"kind", "weight", "sensor"});
    if (c.observation == "pointwise") {
        c.sensor = static_cast<std::size_t>(ob.unsigned_int("sensor", 0, c.mesh_points - 1));
    } else {
        c.weight = ob.choice("weight", {"uniform", "parabola"});
        c.sensor = 0;
    }

    const Reader nz = root.child("noise");
    nz.allow({"level", "seed"});
    c.noise_level = nz.number_in("level", 0.0, 1.0, false);
    c.seed = nz.unsigned_int("seed", 0, std::numeric_limits<std::uint64_t>::max());

    const Reader rc = root.child("recovery");
    rc.allow({"window", "window_decades", "window_step_decades", "max_second_share", "moment_orders", "condition_limit",
              "landscape"});
    if (rc.has("window")) {
        const json& w = rc.node().at("window");
        if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number()) {
            rc.fail("/window", "expected [t_lo, t_hi]");
        }
        const FitWindow fw{w[0].get<double>(), w[1].get<double>()};
        if (!(fw.t_lo > 0.0 && fw.t_hi > fw.t_lo)) {
            rc.fail("/window", "need 0 < t_lo < t_hi");
        }
        c.window = fw;
    }
    c.window_policy.decades = rc.number_in("window_decades", 0.0, 10.0, true);
    c.window_policy.step_decades = rc.number_in("window_step_decades", 0.0, 10.0, true);
    c.window_policy.max_second_share = rc.number_in("max_second_share", 0.0, 1.0, true);
    c.moment_orders = static_cast<int>(rc.unsigned_int("moment_orders", 1, 3));
    c.condition_limit = rc.number_in("condition_limit", 1.0, 1e300, true);
    const Reader ls = rc.child("landscape");
    ls.allow({"alpha", "beta"});
    c.landscape_alpha = read_axis(ls.child("alpha"), 0.0, 2.0);
    c.landscape_beta = read_axis(ls.child("beta"), 0.0, 1.0);

    const Reader out = root.child("output");
    out.allow({"directory"});
    c.output_directory = out.text("directory");
    return c;
}

} // namespace

RunConfig parse_run_config(const std::string& text)
{
    json user;
    try {
        user = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!user.is_object()) {
        throw ConfigError("config /: expected an object");
    }
    std::string name = "unit";
    if (user.contains("preset")) {
        if (!user["preset"].is_string()) {
            throw ConfigError("config /preset: expected a string");
        }
        name = user["preset"].get<std::string>();
    }
    json doc = preset_defaults(name);
    doc.merge_patch(user);
    return read(doc);
}

RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("config: cannot open " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str());
}

namespace {

CoefficientFn coefficient_fn(const CoefficientSpec& c)
{
    if (c.kind == "linear") {
        return [v = c.value, s = c.slope](double x) { return v + s * x; };
    }
    return [v = c.value](double) { return v; };
}

} // namespace

Experiment build_experiment(const RunConfig& config)
{
    OperatorSpec spec;
    spec.length = config.length;
    spec.mesh_points = config.mesh_points;
    spec.potential = coefficient_fn(config.potential);
    if (config.diffusivity.kind == "scaled") {
        if (config.potential.kind != "constant") {
            throw ConfigError("config /operator/diffusivity: kind 'scaled' needs a constant potential");
        }
        // lambda_1 of -d^2/dx^2 on this mesh, then shift by -c.
        const double h = spec.mesh_step();
        const double sn = std::sin(std::numbers::pi * h / (2.0 * config.length));
        const double mu1 = 4.0 / (h * h) * sn * sn;
        const double scale = (config.diffusivity.value + config.potential.value) / mu1;
        if (!(scale > 0.0)) {
            throw ConfigError("config /operator/diffusivity: target eigenvalue not reachable with this potential");
        }
        spec.diffusivity = [scale](double) { return scale; };
    } else {
        spec.diffusivity = coefficient_fn(config.diffusivity);
    }
    Experiment ex{spec, eigendecompose(discretize(spec)), {}, {}, {}};

    const std::size_t n = config.mesh_points;
    std::vector<double> a(n);
    if (config.initial.kind == "eigenmode") {
        const auto phi = ex.spectrum.mode(config.initial.index - 1);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = config.initial.scale * phi[i];
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double x = ex.spec.node(i);
            a[i] = config.initial.scale * x * (config.length - x);
        }
    }

    std::vector<double> times = config.times.kind == "geometric"
                                    ? geometric_grid(config.times.t_lo, config.times.t_hi, config.times.count)
                                    : linear_grid(config.times.t_lo, config.times.t_hi, config.times.count);
    ex.problem = {config.alpha, config.beta, a, config.sensor, std::move(times)};
    ex.problem.validate_for(ex.spectrum);

    if (config.observation == "weighted") {
        ex.rho.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = ex.spec.node(i);
            ex.rho[i] = config.weight == "uniform" ? 1.0 : x * (config.length - x);
        }
        ex.model = weighted_observation(ex.spectrum, a, ex.rho);
    } else {
        ex.model = pointwise_observation(ex.spectrum, a, config.sensor);
    }
    return ex;
}

TimeSeries observe(const Experiment& experiment, const TruncationConfig& truncation, TruncationReport* report)
{
    if (!experiment.rho.empty()) {
        return observe_weighted(experiment.problem, experiment.spectrum, experiment.rho, truncation, report);
    }
    return solve_pointwise(experiment.problem, experiment.spectrum, truncation, report);
}

RecoveryConfig recovery_config(const RunConfig& config)
{
    RecoveryConfig rc;
    rc.window = config.window;
    rc.window_policy = config.window_policy;
    rc.moments.orders = config.moment_orders;
    rc.moments.condition_limit = config.condition_limit;
    return rc;
}

} // namespace fracdiff::cli
