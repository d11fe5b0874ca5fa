#pragma once

#include <array>
#include <span>
#include <vector>

namespace fracdiff {

/// Order and accuracy requested from the Mittag-Leffler evaluators.
struct MLParams {
    double alpha = 0.5;
    double accuracy_target = 1e-12;

    /// Throws PreconditionViolation unless 0 < alpha <= 2 and 0 < accuracy_target < 1.
    void validate() const;
};

/// sin(pi x) with exact argument reduction, so integer x gives exactly 0.
double sin_pi(double x);

/// 1/Gamma(x). Exactly zero at the poles x = 0, -1, -2, ...
double recip_gamma(double x);

struct SeriesSum {
    double value = 0.0;
    int terms = 0;
};

/// Partial sum of sum_k z^k / Gamma(alpha k + 1) in extended precision with
/// compensated accumulation. Throws NonConvergence when `max_terms` is hit
/// before a term drops below accuracy_target times the running sum.
SeriesSum ml_series(const MLParams& params, double z, int max_terms = 20000);

/// Coefficients (-1)^{l+1} / Gamma(1 - alpha l) of the large-|z| expansion
///   E_{alpha,1}(-x) ~ sum_l coefficient(l) x^{-l}.
class AsymptoticExpansion {
public:
    static constexpr int kMaxTerms = 10;
    /// Coefficients are kept a little past kMaxTerms so the first omitted
    /// non-vanishing term can always be found.
    static constexpr int kStoredTerms = 40;

    explicit AsymptoticExpansion(double alpha);

    double alpha() const noexcept { return alpha_; }
    /// l is 1-based.
    double coefficient(int l) const { return coefficients_.at(static_cast<std::size_t>(l - 1)); }

private:
    double alpha_;
    std::array<double, kStoredTerms> coefficients_{};
};

struct AsymptoticSum {
    double value = 0.0;
    /// Magnitude of the first non-vanishing omitted term.
    double error_estimate = 0.0;
    int terms = 0;
};

/// Fixed-length truncation with N terms. z must be negative. Throws
/// RegimeError when the omitted-term estimate exceeds accuracy_target * |value|.
/// For 1 < alpha < 2 this is only the algebraic part; the exponentially
/// decaying oscillation is returned by ml_pole_term.
AsymptoticSum ml_asymptotic(const MLParams& params, double z, int num_terms);

/// Optimal truncation: stops at the smallest term, at most kMaxTerms terms.
/// Same RegimeError contract as ml_asymptotic.
AsymptoticSum ml_asymptotic_optimal(const MLParams& params, double z);

/// (2/alpha) exp(t cos(pi/alpha)) cos(t sin(pi/alpha)), t = (-z)^{1/alpha},
/// for 1 < alpha < 2; zero for alpha <= 1.
double ml_pole_term(double alpha, double z);

/// E_{alpha,1}(z) for z < 0 from the real-axis Laplace representation
///   E(-x) = sin(pi a)/(pi a) int_0^inf exp(-w^{1/a}) x / (w^2 + 2 w x cos(pi a) + x^2) dw
/// plus ml_pole_term for alpha > 1.
double ml_integral(const MLParams& params, double z);

enum class MLRegime { Exact, Series, Integral, Asymptotic };

struct MLEvaluation {
    double value = 0.0;
    MLRegime regime = MLRegime::Exact;
};

/// Evaluator bound to one order. Caches the expansion coefficients, so build
/// one per alpha and call it many times.
class MittagLeffler {
public:
    /// |z| at or below which the power series is used.
    static constexpr double kSeriesRadius = 0.5;
    /// Largest positive argument accepted (series only).
    static constexpr double kPositiveCutoff = 1.0;

    explicit MittagLeffler(MLParams params);

    const MLParams& params() const noexcept { return params_; }

    MLEvaluation evaluate(double z) const;
    double operator()(double z) const { return evaluate(z).value; }

private:
    MLParams params_;
    AsymptoticExpansion expansion_;
};

/// Dispatching evaluator; see MittagLeffler.
double ml_eval(const MLParams& params, double z);

/// L1 discretisation of the Caputo derivative of order 0 < alpha < 1 on the
/// uniform grid t_j = j dt. Entry 0 is zero; entry n uses samples 0..n.
std::vector<double> caputo_l1(std::span<const double> samples, double alpha, double dt);

} // namespace fracdiff
