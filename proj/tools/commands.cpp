#include "commands.hpp"

#include "fracdiff/errors.hpp"
#include "fracdiff/mittag_leffler.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace fracdiff::cli {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

std::string cmd_ml(const MlRequest& req)
{
    if (!(std::isfinite(req.z_lo) && std::isfinite(req.z_hi)) || req.z_lo > req.z_hi) {
        throw PreconditionViolation("ml: need a finite range with z_lo <= z_hi");
    }
    const bool log = req.spacing == "log";
    if (!log && req.spacing != "linear") {
        throw PreconditionViolation("ml: spacing must be linear or log");
    }
    if (log && (req.z_lo * req.z_hi <= 0.0)) {
        throw PreconditionViolation("ml: log spacing needs nonzero endpoints of one sign");
    }
    const MittagLeffler ml({req.alpha});
    std::string out = "z,E\n";
    for (std::size_t i = 0; i < req.count; ++i) {
        const double s = req.count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(req.count - 1);
        double z = req.z_lo + s * (req.z_hi - req.z_lo);
        if (log) {
            const double sign = req.z_lo < 0.0 ? -1.0 : 1.0;
            const double l0 = std::log(std::abs(req.z_lo));
            const double l1 = std::log(std::abs(req.z_hi));
            z = sign * std::exp(l0 + s * (l1 - l0));
        }
        if (i + 1 == req.count && req.count > 1) {
            z = req.z_hi;
        }
        out += fmt(z) + "," + fmt(ml(z)) + "\n";
    }
    return out;
}

SolveOutput cmd_solve(const RunConfig& config)
{
    const Experiment ex = build_experiment(config);
    TruncationReport report;
    TimeSeries clean = observe(ex, {}, &report);

    SolveOutput out;
    if (config.noise_level > 0.0) {
        out.series_csv = to_csv(clean, add_noise(clean, config.noise_level, config.seed));
    } else {
        out.series_csv = to_csv(clean);
    }

    const auto& eig = ex.spectrum.eigenvalues();
    const auto coeffs = ex.spectrum.project(ex.problem.initial);
    ordered_json meta;
    meta["version"] = kConfigVersion;
    meta["command"] = "solve";
    meta["preset"] = config.preset;
    ordered_json problem;
    problem["alpha"] = config.alpha;
    problem["beta"] = config.beta;
    problem["observation"] = config.observation;
    if (config.observation == "pointwise") {
        problem["sensor"] = config.sensor;
        problem["sensor_x"] = ex.spec.node(config.sensor);
    } else {
        problem["weight"] = config.weight;
    }
    problem["times"] = {{"kind", config.times.kind},
                        {"t_lo", config.times.t_lo},
                        {"t_hi", config.times.t_hi},
                        {"count", config.times.count}};
    meta["problem"] = problem;
    meta["noise"] = {{"level", config.noise_level}, {"seed", config.seed}};
    meta["spectrum"] = {{"mesh_points", config.mesh_points},
                        {"mesh_step", ex.spec.mesh_step()},
                        {"lambda_min", eig.front()},
                        {"lambda_max", eig.back()}};
    meta["identifiability"] = {{"k0", ex.model.k0 ? ordered_json(*ex.model.k0) : ordered_json(nullptr)},
                               {"one_signed", ex.model.one_signed}};
    meta["truncation"] = {{"modes_used", report.modes_used},
                          {"modes_available", report.modes_available},
                          {"tail_bound", report.tail_bound}};
    meta["leading_term"] = {{"p", modal_moment(ex.model.modes, config.beta)},
                            {"gamma_factor", recip_gamma(1.0 - config.alpha)}};
    ordered_json modes = ordered_json::array();
    for (std::size_t k = 0; k < report.modes_used; ++k) {
        modes.push_back({{"k", k + 1},
                         {"lambda", eig[k]},
                         {"a_k", coeffs[k]},
                         {"weight", ex.model.modes.weights[k]}});
    }
    meta["modes"] = modes;
    out.meta_json = meta.dump(2) + "\n";
    return out;
}

RecoverOutput cmd_recover(const RunConfig& config, const TimeSeries& series)
{
    const Experiment ex = build_experiment(config);
    RecoverOutput out;
    out.result = recover(series, ex.model, recovery_config(config));
    out.json = to_json(out.result);
    out.exit_code = out.result.identifiable ? kSuccess : kNonIdentifiable;
    return out;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text)
{
    const auto x = text.find_first_of("xX");
    auto number = [&](const std::string& s) -> std::size_t {
        if (s.empty() || s.size() > 4 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            throw ConfigError("--grid: expected AxB with positive integers, got '" + text + "'");
        }
        const auto v = static_cast<std::size_t>(std::stoul(s));
        if (v == 0 || v > 1000) {
            throw ConfigError("--grid: counts must lie in [1, 1000]");
        }
        return v;
    };
    if (x == std::string::npos) {
        throw ConfigError("--grid: expected AxB, got '" + text + "'");
    }
    return {number(text.substr(0, x)), number(text.substr(x + 1))};
}

LandscapeOutput cmd_landscape(const RunConfig& config, const std::optional<TimeSeries>& series,
                              std::optional<std::pair<std::size_t, std::size_t>> grid)
{
    const Experiment ex = build_experiment(config);
    TimeSeries data;
    if (series) {
        data = *series;
    } else {
        data = observe(ex);
        if (config.noise_level > 0.0) {
            data = add_noise(data, config.noise_level, config.seed);
        }
    }
    AxisSpec a_axis = config.landscape_alpha;
    AxisSpec b_axis = config.landscape_beta;
    if (grid) {
        a_axis.count = grid->first;
        b_axis.count = grid->second;
    }

    LandscapeOutput out;
    out.landscape = residual_landscape(data, ex.model.modes, a_axis.values(), b_axis.values());
    out.minima = local_minima(out.landscape);
    out.beta_flat = detect_beta_flat(out.landscape, 1e-12);

    const Landscape& l = out.landscape;
    out.csv = "alpha/beta";
    for (double b : l.beta_grid) {
        out.csv += "," + fmt(b);
    }
    out.csv += "\n";
    for (std::size_t i = 0; i < l.alpha_grid.size(); ++i) {
        out.csv += fmt(l.alpha_grid[i]);
        for (std::size_t j = 0; j < l.beta_grid.size(); ++j) {
            out.csv += "," + fmt(l.at(i, j));
        }
        out.csv += "\n";
    }
    return out;
}

namespace {

struct Check {
    const char* name;
    const char* measure;
    double tolerance;
    /// true: pass iff value <= tolerance; false: pass iff value >= tolerance.
    bool upper;
    double (*run)();
};

double check_ml_reductions()
{
    double worst = 0.0;
    const MittagLeffler e1({1.0});
    const MittagLeffler eh({0.5});
    for (int i = 0; i <= 50; ++i) {
        const double z = -5.0 + 0.1 * i;
        worst = std::max(worst, std::abs(e1(z) - std::exp(z)) / std::exp(z));
        const double x = 0.1 * i;
        const double ref = std::exp(x * x) * std::erfc(x);
        worst = std::max(worst, std::abs(eh(-x) - ref) / ref);
    }
    return worst;
}

OperatorSpec unit_operator(std::size_t n)
{
    OperatorSpec spec;
    spec.mesh_points = n;
    return spec;
}

double check_spectral_vs_balakrishnan()
{
    const auto spec = unit_operator(63);
    const auto op = discretize(spec);
    const auto spectrum = eigendecompose(op);
    std::vector<double> a(spec.mesh_points);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = spec.node(i) * (1.0 - spec.node(i));
    }
    double worst = 0.0;
    for (double beta : {0.3, 0.7}) {
        const auto s = fractional_apply(spectrum, -beta, a);
        const auto q = balakrishnan_neg_power(op, beta, a).values;
        std::vector<double> d(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            d[i] = q[i] - s[i];
        }
        worst = std::max(worst, norm_h(d, spec.mesh_step()) / norm_h(s, spec.mesh_step()));
    }
    return worst;
}

double check_positivity()
{
    const auto spec = unit_operator(63);
    const auto op = discretize(spec);
    const auto spectrum = eigendecompose(op);
    const std::size_t n = spec.mesh_points;
    double worst = std::numeric_limits<double>::infinity();
    for (std::uint64_t r = 0; r < 5; ++r) {
        std::vector<double> a(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<double>(splitmix64(2024, r * n + i) >> 11) * 0x1.0p-53;
        }
        for (double beta : {0.25, 0.5, 0.75}) {
            const auto v = fractional_apply(spectrum, -beta, a);
            worst = std::min(worst, *std::min_element(v.begin(), v.end()) / *std::max_element(v.begin(), v.end()));
        }
        for (double eta : {0.0, 1.0, 10.0}) {
            if (!resolvent_positivity_check(op, eta, a)) {
                return -1.0;
            }
        }
    }
    return worst;
}

double check_caputo_order()
{
    const auto spec = unit_operator(63);
    const auto spectrum = eigendecompose(discretize(spec));
    const auto phi0 = spectrum.mode(0);
    const std::vector<double> phi(phi0.begin(), phi0.end());
    const double alpha = 0.5;
    const double beta = 0.6;
    const double rate = std::pow(spectrum.eigenvalues()[0], beta);
    std::vector<double> residuals;
    for (double dt : {1e-2, 5e-3, 2.5e-3}) {
        const auto steps = static_cast<std::size_t>(std::lround(1.0 / dt));
        std::vector<double> times(steps);
        for (std::size_t i = 0; i < steps; ++i) {
            times[i] = dt * static_cast<double>(i + 1);
        }
        const auto u = solve_pointwise({alpha, beta, phi, 31, times}, spectrum);
        std::vector<double> samples{phi[31]};
        samples.insert(samples.end(), u.values.begin(), u.values.end());
        const auto d = caputo_l1(samples, alpha, dt);
        residuals.push_back(std::abs(d.back() + rate * samples.back()));
    }
    return std::log2(residuals[1] / residuals[2]);
}

const std::vector<Check>& checks()
{
    static const std::vector<Check> all{
        {"ml_reductions", "max_rel_err", 1e-10, true, check_ml_reductions},
        {"spectral_vs_balakrishnan", "max_rel_err", 1e-6, true, check_spectral_vs_balakrishnan},
        {"positivity", "min_entry_ratio", 1e-300, false, check_positivity},
        {"caputo_order", "observed_order", 1.4, false, check_caputo_order},
    };
    return all;
}

} // namespace

std::vector<std::string> validation_checks()
{
    std::vector<std::string> names;
    for (const Check& c : checks()) {
        names.emplace_back(c.name);
    }
    return names;
}

std::vector<CheckResult> cmd_validate(const std::vector<std::string>& selection, const std::optional<std::string>& fault)
{
    if (fault && std::none_of(checks().begin(), checks().end(), [&](const Check& c) { return *fault == c.name; })) {
        throw ConfigError("validate: unknown check '" + *fault + "' for fault injection");
    }
    std::vector<CheckResult> out;
    for (const std::string& name : selection) {
        const auto it = std::find_if(checks().begin(), checks().end(), [&](const Check& c) { return name == c.name; });
        if (it == checks().end()) {
            throw ConfigError("validate: unknown check '" + name + "'");
        }
        double tol = it->tolerance;
        if (fault && *fault == name) {
            tol = it->upper ? -1.0 : std::numeric_limits<double>::infinity();
        }
        CheckResult r{it->name, false, it->measure, 0.0, tol};
        try {
            r.value = it->run();
            r.passed = it->upper ? r.value <= tol : r.value >= tol;
        } catch (const Error&) {
            r.value = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(r);
    }
    return out;
}

std::string format_report(const std::vector<CheckResult>& results)
{
    std::string out;
    char line[256];
    for (const CheckResult& r : results) {
        std::snprintf(line, sizeof line, "%s %s %s=%.6g tol=%.6g\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                      r.measure.c_str(), r.value, r.tolerance);
        out += line;
    }
    return out;
}

} // namespace fracdiff::cli
