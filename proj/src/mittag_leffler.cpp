#include "fracdiff/mittag_leffler.hpp"

#include "fracdiff/errors.hpp"
#include "fracdiff/quadrature.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace fracdiff {

namespace {

constexpr double kPi = std::numbers::pi;

// cos(pi x) with the same exact reduction as sin_pi.
double cos_pi(double x)
{
    double y = std::fmod(std::abs(x), 2.0);
    if (y > 1.0) {
        y = 2.0 - y;
    }
    double sign = 1.0;
    if (y > 0.5) {
        y = 1.0 - y;
        sign = -1.0;
    }
    return sign * (y <= 0.25 ? std::cos(kPi * y) : std::sin(kPi * (0.5 - y)));
}

bool is_nonpositive_integer(double v)
{
    if (v > 0.0) {
        return false;
    }
    const double r = std::round(v);
    return std::abs(v - r) <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(v));
}

AsymptoticSum asymptotic_sum(const AsymptoticExpansion& expansion, double x, int num_terms, bool optimal)
{
    AsymptoticSum out;
    const double inv = 1.0 / x;
    double power = 1.0;
    double last_magnitude = std::numeric_limits<double>::infinity();
    int l = 1;
    for (; l <= num_terms; ++l) {
        power *= inv;
        const double c = expansion.coefficient(l);
        if (c == 0.0) {
            continue;
        }
        const double term = c * power;
        if (optimal && std::abs(term) > last_magnitude) {
            break;
        }
        out.value += term;
        out.terms = l;
        last_magnitude = std::abs(term);
    }
    // Magnitude of the first omitted non-vanishing term.
    power = std::pow(inv, out.terms);
    out.error_estimate = std::numeric_limits<double>::infinity();
    for (int m = out.terms + 1; m <= AsymptoticExpansion::kStoredTerms; ++m) {
        power *= inv;
        const double c = expansion.coefficient(m);
        if (c != 0.0) {
            out.error_estimate = std::abs(c) * power;
            break;
        }
    }
    return out;
}

void check_regime(const AsymptoticSum& sum, const MLParams& params)
{
    if (!(sum.error_estimate <= params.accuracy_target * std::abs(sum.value))) {
        throw RegimeError("ml_asymptotic: omitted-term estimate " + std::to_string(sum.error_estimate) +
                          " exceeds accuracy target relative to |value| = " + std::to_string(std::abs(sum.value)));
    }
}

// Laplace-type integral part of E_{alpha,1}(-x), x > 0, alpha in (0,2) \ {1}.
double laplace_part(double alpha, double x)
{
    using quad::DENode;
    using quad::DETable;

    const double s = sin_pi(alpha);
    const double c = cos_pi(alpha);
    const double inv_alpha = 1.0 / alpha;
    const double peak = -c * x;
    const double width2 = (s * x) * (s * x);
    // Beyond this w the factor exp(-w^{1/alpha}) underflows.
    const double log_cutoff = alpha * std::log(745.0);

    auto integrand = [&](double log_w, double dist_to_peak) {
        const double damping = std::exp(-std::exp(log_w * inv_alpha));
        if (damping == 0.0) {
            return 0.0;
        }
        return damping * x / (dist_to_peak * dist_to_peak + width2);
    };

    constexpr double kRelTol = 1e-9;
    constexpr int kMinLevel = 2;

    auto require = [](const quad::DEResult& r) {
        if (!r.converged) {
            throw NonConvergence("ml_integral: double-exponential quadrature did not converge");
        }
        return r.value;
    };

    const bool has_peak = c < 0.0 && std::log(peak) < log_cutoff;
    double breakpoint = 0.0;
    if (has_peak) {
        breakpoint = peak;
    } else if (alpha < 0.3) {
        // exp(-w^{1/alpha}) is nearly a step at w = 1 for small orders.
        breakpoint = 1.0;
    }

    if (breakpoint == 0.0) {
        const auto r = quad::de_integrate(
            DETable::exp_sinh(), [&](const DENode& n) { return integrand(n.log_x, n.x - peak); }, kRelTol, 0.0,
            kMinLevel);
        return require(r);
    }

    const double b = breakpoint;
    const double log_b = std::log(b);
    const auto left = quad::de_integrate(
        DETable::tanh_sinh(),
        [&](const DENode& n) {
            const double w = b * n.x;
            const double d = has_peak ? -b * n.xc : w - peak;
            return b * integrand(log_b + n.log_x, d);
        },
        kRelTol, 0.0, kMinLevel);
    const auto right = quad::de_integrate(
        DETable::exp_sinh(),
        [&](const DENode& n) {
            const double w = b + n.x;
            const double d = has_peak ? n.x : w - peak;
            return integrand(std::log(w), d);
        },
        kRelTol, 0.0, kMinLevel);
    return require(left) + require(right);
}

} // namespace

void MLParams::validate() const
{
    if (!(alpha > 0.0 && alpha <= 2.0)) {
        throw PreconditionViolation("MLParams: alpha must lie in (0, 2], got " + std::to_string(alpha));
    }
    if (!(accuracy_target > 0.0 && accuracy_target < 1.0)) {
        throw PreconditionViolation("MLParams: accuracy_target must lie in (0, 1)");
    }
}

double sin_pi(double x)
{
    double y = std::fmod(std::abs(x), 2.0);
    double sign = x < 0.0 ? -1.0 : 1.0;
    if (y >= 1.0) {
        y -= 1.0;
        sign = -sign;
    }
    if (y > 0.5) {
        y = 1.0 - y;
    }
    return sign * (y <= 0.25 ? std::sin(kPi * y) : std::cos(kPi * (0.5 - y)));
}

double recip_gamma(double x)
{
    if (is_nonpositive_integer(x)) {
        return 0.0;
    }
    if (x > 0.0) {
        if (x > 171.0) {
            return std::exp(-std::lgamma(x));
        }
        return 1.0 / std::tgamma(x);
    }
    // Reflection: 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi.
    const double y = 1.0 - x;
    const double g = y > 171.0 ? std::exp(std::lgamma(y)) : std::tgamma(y);
    return sin_pi(x) * g / kPi;
}

SeriesSum ml_series(const MLParams& params, double z, int max_terms)
{
    params.validate();
    if (z == 0.0) {
        return {1.0, 1};
    }
    const long double alpha = params.alpha;
    const long double log_abs_z = std::log(std::abs(static_cast<long double>(z)));
    const long double target = params.accuracy_target;

    // Neumaier summation in long double.
    long double sum = 1.0L;
    long double compensation = 0.0L;
    long double previous = 1.0L;
    for (int k = 1; k < max_terms; ++k) {
        const long double kd = k;
        const long double magnitude = std::exp(kd * log_abs_z - std::lgamma(alpha * kd + 1.0L));
        const long double term = (z < 0.0 && (k % 2 == 1)) ? -magnitude : magnitude;
        const long double t = sum + term;
        if (std::abs(sum) >= std::abs(term)) {
            compensation += (sum - t) + term;
        } else {
            compensation += (term - t) + sum;
        }
        sum = t;
        if (magnitude <= target * std::abs(sum + compensation) && magnitude < previous) {
            return {static_cast<double>(sum + compensation), k + 1};
        }
        previous = magnitude;
    }
    throw NonConvergence("ml_series: " + std::to_string(max_terms) + " terms did not reach the stopping rule at z = " +
                         std::to_string(z));
}

AsymptoticExpansion::AsymptoticExpansion(double alpha) : alpha_(alpha)
{
    for (int l = 1; l <= kStoredTerms; ++l) {
        const double arg = 1.0 - alpha * l;
        const double sign = (l % 2 == 1) ? 1.0 : -1.0;
        coefficients_[static_cast<std::size_t>(l - 1)] = is_nonpositive_integer(arg) ? 0.0 : sign * recip_gamma(arg);
    }
}

AsymptoticSum ml_asymptotic(const MLParams& params, double z, int num_terms)
{
    params.validate();
    if (!(z < 0.0)) {
        throw PreconditionViolation("ml_asymptotic: z must be negative");
    }
    if (num_terms < 1 || num_terms >= AsymptoticExpansion::kStoredTerms) {
        throw PreconditionViolation("ml_asymptotic: term count out of range");
    }
    const AsymptoticSum sum = asymptotic_sum(AsymptoticExpansion(params.alpha), -z, num_terms, false);
    check_regime(sum, params);
    return sum;
}

AsymptoticSum ml_asymptotic_optimal(const MLParams& params, double z)
{
    params.validate();
    if (!(z < 0.0)) {
        throw PreconditionViolation("ml_asymptotic: z must be negative");
    }
    const AsymptoticSum sum =
        asymptotic_sum(AsymptoticExpansion(params.alpha), -z, AsymptoticExpansion::kMaxTerms, true);
    check_regime(sum, params);
    return sum;
}

double ml_pole_term(double alpha, double z)
{
    if (alpha <= 1.0 || z >= 0.0) {
        return 0.0;
    }
    const double t = std::pow(-z, 1.0 / alpha);
    const double decay = t * cos_pi(1.0 / alpha);
    if (decay < -745.0) {
        return 0.0;
    }
    return (2.0 / alpha) * std::exp(decay) * std::cos(t * sin_pi(1.0 / alpha));
}

double ml_integral(const MLParams& params, double z)
{
    params.validate();
    if (!(z < 0.0)) {
        throw PreconditionViolation("ml_integral: z must be negative");
    }
    const double alpha = params.alpha;
    if (alpha == 1.0) {
        return std::exp(z);
    }
    if (alpha == 2.0) {
        return std::cos(std::sqrt(-z));
    }
    const double x = -z;
    return sin_pi(alpha) / (alpha * kPi) * laplace_part(alpha, x) + ml_pole_term(alpha, z);
}

MittagLeffler::MittagLeffler(MLParams params) : params_(params), expansion_(params.alpha)
{
    params_.validate();
}

MLEvaluation MittagLeffler::evaluate(double z) const
{
    const double alpha = params_.alpha;
    if (z == 0.0) {
        return {1.0, MLRegime::Exact};
    }
    if (std::isnan(z)) {
        throw PreconditionViolation("MittagLeffler: z is NaN");
    }
    if (z > kPositiveCutoff) {
        throw UnsupportedRegime("MittagLeffler: positive argument " + std::to_string(z) +
                                " is beyond the series cutoff");
    }
    if (alpha == 1.0) {
        return {std::exp(z), MLRegime::Exact};
    }
    if (alpha == 2.0) {
        return {z < 0.0 ? std::cos(std::sqrt(-z)) : std::cosh(std::sqrt(z)), MLRegime::Exact};
    }
    if (z > 0.0 || -z <= kSeriesRadius) {
        MLParams tight = params_;
        tight.accuracy_target = std::max(1e-3 * params_.accuracy_target, 1e-19);
        return {ml_series(tight, z).value, MLRegime::Series};
    }
    if (std::isinf(z)) {
        return {0.0, MLRegime::Asymptotic};
    }

    const double pole = ml_pole_term(alpha, z);
    const AsymptoticSum asym = asymptotic_sum(expansion_, -z, AsymptoticExpansion::kMaxTerms, true);
    const double value = asym.value + pole;
    if (asym.error_estimate <= 0.1 * params_.accuracy_target * std::abs(value)) {
        return {value, MLRegime::Asymptotic};
    }
    return {sin_pi(alpha) / (alpha * kPi) * laplace_part(alpha, -z) + pole, MLRegime::Integral};
}

double ml_eval(const MLParams& params, double z)
{
    return MittagLeffler(params)(z);
}

std::vector<double> caputo_l1(std::span<const double> samples, double alpha, double dt)
{
    if (samples.size() < 2) {
        throw BadGrid("caputo_l1: need at least two samples");
    }
    if (!(dt > 0.0)) {
        throw BadGrid("caputo_l1: step must be positive");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw PreconditionViolation("caputo_l1: order must lie in (0, 1)");
    }
    const std::size_t n = samples.size();
    std::vector<double> weights(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double jd = static_cast<double>(j);
        weights[j] = std::pow(jd + 1.0, 1.0 - alpha) - std::pow(jd, 1.0 - alpha);
    }
    const double scale = std::pow(dt, -alpha) / std::tgamma(2.0 - alpha);
    std::vector<double> out(n, 0.0);
    for (std::size_t m = 1; m < n; ++m) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            acc += weights[j] * (samples[m - j] - samples[m - j - 1]);
        }
        out[m] = scale * acc;
    }
    return out;
}

} // namespace fracdiff
