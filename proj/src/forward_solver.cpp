#include "fracdiff/forward_solver.hpp"

#include "fracdiff/errors.hpp"
#include "fracdiff/mittag_leffler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace fracdiff {

namespace {

void check_orders(double alpha, double beta)
{
    if (!(alpha > 0.0 && alpha < 2.0) || std::abs(alpha - 1.0) <= 1e-12) {
        throw PreconditionViolation("alpha must lie in (0, 2) and differ from 1, got " + std::to_string(alpha));
    }
    if (!(beta > 0.0 && beta < 1.0)) {
        throw PreconditionViolation("beta must lie in (0, 1), got " + std::to_string(beta));
    }
}

void check_times(std::span<const double> times)
{
    if (times.empty()) {
        throw BadGrid("time grid is empty");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0) || !std::isfinite(times[i])) {
            throw BadGrid("time grid entry " + std::to_string(i) + " is not a finite positive number");
        }
        if (i > 0 && !(times[i] > times[i - 1])) {
            throw BadGrid("time grid is not strictly increasing at entry " + std::to_string(i));
        }
    }
}

/// Smallest K whose tail bound is within rel_tol of |running(K)|.
/// `bounds[k]` bounds the magnitude of term k, `running(K)` is the magnitude
/// of the K-term partial sum.
template <class Running>
std::size_t choose_truncation(const std::vector<double>& bounds, double rel_tol, Running running, double* tail_out)
{
    const std::size_t n = bounds.size();
    std::vector<double> tail(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        tail[k] = tail[k + 1] + bounds[k];
    }
    if (!std::isfinite(tail[0])) {
        throw TruncationFailure("modal tail bound is not finite");
    }
    for (std::size_t K = 0; K <= n; ++K) {
        const double magnitude = running(K);
        if (!std::isfinite(magnitude)) {
            throw TruncationFailure("modal partial sum is not finite");
        }
        if (tail[K] <= rel_tol * magnitude || tail[K] == 0.0) {
            *tail_out = tail[K];
            return K;
        }
    }
    throw TruncationFailure("tail bound above tolerance with every discrete mode included");
}

std::vector<double> lambda_powers(std::span<const double> eigenvalues, double beta)
{
    std::vector<double> out(eigenvalues.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (!(eigenvalues[k] > 0.0)) {
            throw PreconditionViolation("modal series needs positive eigenvalues");
        }
        out[k] = std::pow(eigenvalues[k], beta);
    }
    return out;
}

/// Bound constant C with |E_{alpha,1}(-x)| <= C / (1 + x). For alpha < 1 the
/// floor holds outright; above 1 the pole oscillation lifts the supremum
/// (about 4.8 at alpha = 1.7), so it is scanned and padded by 25%.
double decay_constant(const MittagLeffler& ml, double floor)
{
    const double alpha = ml.params().alpha;
    if (alpha <= 1.0) {
        return floor;
    }
    double sup = 0.0;
    constexpr int kSamples = 600;
    for (int i = 0; i <= kSamples; ++i) {
        const double x = std::pow(10.0, -2.0 + 8.0 * i / kSamples);
        sup = std::max(sup, std::abs(ml(-x)) * (1.0 + x));
    }
    return std::max(floor, 1.25 * sup);
}

std::string format_number(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

void ProblemSpec::validate() const
{
    check_orders(alpha, beta);
    if (initial.empty()) {
        throw PreconditionViolation("initial datum is empty");
    }
    if (sensor >= initial.size()) {
        throw PreconditionViolation("sensor node " + std::to_string(sensor) + " outside the mesh");
    }
    check_times(time_grid);
}

void ProblemSpec::validate_for(const Spectrum& spectrum) const
{
    validate();
    if (initial.size() != spectrum.size()) {
        throw PreconditionViolation("initial datum has " + std::to_string(initial.size()) + " nodes, mesh has " +
                                    std::to_string(spectrum.size()));
    }
}

void TimeSeries::validate() const
{
    if (times.size() != values.size()) {
        throw BadGrid("time series has " + std::to_string(times.size()) + " times but " +
                      std::to_string(values.size()) + " values");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw BadGrid("time series times not strictly increasing at entry " + std::to_string(i));
        }
    }
}

std::vector<double> geometric_grid(double t_lo, double t_hi, std::size_t n)
{
    if (!(t_lo > 0.0 && t_hi > t_lo) || n < 2) {
        throw BadGrid("geometric grid needs 0 < t_lo < t_hi and at least 2 points");
    }
    std::vector<double> out(n);
    const double ratio = std::log(t_hi / t_lo);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = t_lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    out.front() = t_lo;
    out.back() = t_hi;
    return out;
}

std::vector<double> linear_grid(double t_lo, double t_hi, std::size_t n)
{
    if (!(t_lo > 0.0 && t_hi > t_lo) || n < 2) {
        throw BadGrid("linear grid needs 0 < t_lo < t_hi and at least 2 points");
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = t_lo + (t_hi - t_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    out.back() = t_hi;
    return out;
}

ModalSeries pointwise_modes(const Spectrum& spectrum, std::span<const double> a, std::size_t sensor)
{
    if (sensor >= spectrum.size()) {
        throw PreconditionViolation("pointwise_modes: sensor node outside the mesh");
    }
    ModalSeries out;
    out.eigenvalues.assign(spectrum.eigenvalues().begin(), spectrum.eigenvalues().end());
    out.weights = spectrum.project(a);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        out.weights[k] *= spectrum.mode(k)[sensor];
    }
    return out;
}

ModalSeries weighted_modes(const Spectrum& spectrum, std::span<const double> a, std::span<const double> rho)
{
    ModalSeries out;
    out.eigenvalues.assign(spectrum.eigenvalues().begin(), spectrum.eigenvalues().end());
    out.weights = spectrum.project(a);
    const std::vector<double> r = spectrum.project(rho);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        out.weights[k] *= r[k];
    }
    return out;
}

std::vector<double> evaluate_modal_series(const ModalSeries& series, double alpha, double beta,
                                          std::span<const double> times, const TruncationConfig& config,
                                          TruncationReport* report)
{
    check_orders(alpha, beta);
    check_times(times);
    if (series.weights.size() != series.eigenvalues.size()) {
        throw PreconditionViolation("modal series: weight and eigenvalue counts differ");
    }
    const std::size_t n = series.weights.size();
    const std::vector<double> lb = lambda_powers(series.eigenvalues, beta);
    const MittagLeffler ml({alpha, config.ml_accuracy});

    const double t0_alpha = std::pow(times.front(), alpha);
    const double C = decay_constant(ml, config.bound_constant);
    std::vector<double> bounds(n);
    for (std::size_t k = 0; k < n; ++k) {
        bounds[k] = std::abs(series.weights[k]) * C / (1.0 + lb[k] * t0_alpha);
    }
    double partial = 0.0;
    std::size_t summed = 0;
    auto running = [&](std::size_t K) {
        for (; summed < K; ++summed) {
            partial += series.weights[summed] * ml(-lb[summed] * t0_alpha);
        }
        return std::abs(partial);
    };
    double tail = 0.0;
    const std::size_t K = choose_truncation(bounds, config.rel_tol, running, &tail);

    std::vector<double> out(times.size(), 0.0);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double ta = std::pow(times[i], alpha);
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            acc += series.weights[k] * ml(-lb[k] * ta);
        }
        out[i] = acc;
    }
    if (report != nullptr) {
        *report = {K, n, tail};
    }
    return out;
}

TimeSeries solve_pointwise(const ProblemSpec& problem, const Spectrum& spectrum, const TruncationConfig& config,
                           TruncationReport* report)
{
    problem.validate_for(spectrum);
    TimeSeries out;
    out.times = problem.time_grid;
    out.values = evaluate_modal_series(pointwise_modes(spectrum, problem.initial, problem.sensor), problem.alpha,
                                       problem.beta, problem.time_grid, config, report);
    return out;
}

std::vector<double> solve_field(const ProblemSpec& problem, const Spectrum& spectrum, double t,
                                const TruncationConfig& config, TruncationReport* report)
{
    check_orders(problem.alpha, problem.beta);
    if (problem.initial.size() != spectrum.size()) {
        throw PreconditionViolation("solve_field: initial datum does not match the mesh");
    }
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw BadGrid("solve_field: time must be finite and positive");
    }
    const std::size_t n = spectrum.size();
    const std::vector<double> c = spectrum.project(problem.initial);
    const std::vector<double> lb = lambda_powers(spectrum.eigenvalues(), problem.beta);
    const MittagLeffler ml({problem.alpha, config.ml_accuracy});
    const double ta = std::pow(t, problem.alpha);
    const double C = decay_constant(ml, config.bound_constant);

    std::vector<double> bounds(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto phi = spectrum.mode(k);
        double sup = 0.0;
        for (double v : phi) {
            sup = std::max(sup, std::abs(v));
        }
        bounds[k] = std::abs(c[k]) * sup * C / (1.0 + lb[k] * ta);
    }
    std::vector<double> field(n, 0.0);
    std::size_t summed = 0;
    auto running = [&](std::size_t K) {
        for (; summed < K; ++summed) {
            const double coef = c[summed] * ml(-lb[summed] * ta);
            const auto phi = spectrum.mode(summed);
            for (std::size_t i = 0; i < n; ++i) {
                field[i] += coef * phi[i];
            }
        }
        double sup = 0.0;
        for (double v : field) {
            sup = std::max(sup, std::abs(v));
        }
        return sup;
    };
    double tail = 0.0;
    const std::size_t K = choose_truncation(bounds, config.rel_tol, running, &tail);
    if (report != nullptr) {
        *report = {K, n, tail};
    }
    return field;
}

TimeSeries observe_weighted(const ProblemSpec& problem, const Spectrum& spectrum, std::span<const double> rho,
                            const TruncationConfig& config, TruncationReport* report)
{
    problem.validate_for(spectrum);
    if (rho.size() != spectrum.size()) {
        throw PreconditionViolation("observe_weighted: weight does not match the mesh");
    }
    TimeSeries out;
    out.times = problem.time_grid;
    out.values = evaluate_modal_series(weighted_modes(spectrum, problem.initial, rho), problem.alpha, problem.beta,
                                       problem.time_grid, config, report);
    return out;
}

double LeadingTerm::operator()(double t) const
{
    return p * gamma_factor / std::pow(t, alpha);
}

LeadingTerm asymptotic_leading(const ProblemSpec& problem, const Spectrum& spectrum)
{
    check_orders(problem.alpha, problem.beta);
    if (problem.initial.size() != spectrum.size() || problem.sensor >= spectrum.size()) {
        throw PreconditionViolation("asymptotic_leading: problem does not match the mesh");
    }
    LeadingTerm out;
    out.alpha = problem.alpha;
    out.p = fractional_apply(spectrum, -problem.beta, problem.initial)[problem.sensor];
    out.gamma_factor = recip_gamma(1.0 - problem.alpha);
    return out;
}

std::optional<double> leading_dominance_time(const LeadingTerm& law, const TimeSeries& series, double share)
{
    series.validate();
    std::optional<double> onset;
    for (std::size_t i = series.times.size(); i-- > 0;) {
        const double lead = law(series.times[i]);
        if (std::abs(series.values[i] - lead) > share * std::abs(lead)) {
            break;
        }
        onset = series.times[i];
    }
    return onset;
}

std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter)
{
    std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double standard_normal(std::uint64_t seed, std::uint64_t index)
{
    const std::uint64_t pair = index / 2;
    // u1 in (0, 1], u2 in [0, 1).
    const double u1 = static_cast<double>((splitmix64(seed, 2 * pair) >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(splitmix64(seed, 2 * pair + 1) >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return index % 2 == 0 ? r * std::cos(theta) : r * std::sin(theta);
}

TimeSeries add_noise(const TimeSeries& series, double level, std::uint64_t seed)
{
    if (!(level >= 0.0) || !std::isfinite(level)) {
        throw PreconditionViolation("add_noise: level must be finite and >= 0");
    }
    series.validate();
    TimeSeries out = series;
    out.noise_level = level;
    out.seed = seed;
    if (level == 0.0) {
        return out;
    }
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] *= 1.0 + level * standard_normal(seed, i);
    }
    return out;
}

std::string to_csv(const TimeSeries& series)
{
    series.validate();
    std::string out = "t,u\n";
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        out += format_number(series.times[i]) + "," + format_number(series.values[i]) + "\n";
    }
    return out;
}

std::string to_csv(const TimeSeries& clean, const TimeSeries& noisy)
{
    clean.validate();
    noisy.validate();
    if (clean.times != noisy.times) {
        throw PreconditionViolation("to_csv: clean and noisy series use different times");
    }
    std::string out = "t,u_clean,u_noisy\n";
    for (std::size_t i = 0; i < clean.times.size(); ++i) {
        out += format_number(clean.times[i]) + "," + format_number(clean.values[i]) + "," +
               format_number(noisy.values[i]) + "\n";
    }
    return out;
}

TimeSeries parse_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    TimeSeries out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1) {
            if (line == "t,u") {
                columns = 2;
            } else if (line == "t,u_clean,u_noisy") {
                columns = 3;
            } else {
                throw ParseError("line 1: expected header 't,u' or 't,u_clean,u_noisy', got '" + line + "'");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::size_t end = comma == std::string::npos ? line.size() : comma;
            double value = 0.0;
            const char* first = line.data() + start;
            const char* last = line.data() + end;
            const auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc() || ptr != last || first == last) {
                throw ParseError("line " + std::to_string(line_no) + ": field " + std::to_string(fields.size() + 1) +
                                 " is not a number");
            }
            fields.push_back(value);
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (fields.size() != columns) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                             " fields, got " + std::to_string(fields.size()));
        }
        if (!out.times.empty() && !(fields[0] > out.times.back())) {
            throw ParseError("line " + std::to_string(line_no) + ": times must strictly increase");
        }
        out.times.push_back(fields[0]);
        out.values.push_back(fields.back());
    }
    if (columns == 0) {
        throw ParseError("line 1: missing header");
    }
    if (out.times.empty()) {
        throw ParseError("no data rows");
    }
    return out;
}

} // namespace fracdiff
