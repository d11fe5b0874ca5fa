#pragma once

#include "fracdiff/spectral_operator.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fracdiff {

/// Orders, initial datum and observation times for
///   D_t^alpha u = -A^beta u,  u(., 0) = a  (and u_t(., 0) = 0 when alpha > 1).
struct ProblemSpec {
    double alpha = 0.5;
    double beta = 0.5;
    std::vector<double> initial;
    std::size_t sensor = 0;
    std::vector<double> time_grid;

    /// PreconditionViolation for bad orders or an out-of-range sensor,
    /// BadGrid for an empty, non-positive or non-increasing time grid.
    void validate() const;
    /// validate() plus a size check against the mesh.
    void validate_for(const Spectrum& spectrum) const;
};

struct TimeSeries {
    std::vector<double> times;
    std::vector<double> values;
    double noise_level = 0.0;
    std::optional<std::uint64_t> seed;

    /// BadGrid unless lengths match and times strictly increase.
    void validate() const;
};

/// n geometrically spaced times from t_lo to t_hi inclusive.
std::vector<double> geometric_grid(double t_lo, double t_hi, std::size_t n);
/// n equally spaced times from t_lo to t_hi inclusive.
std::vector<double> linear_grid(double t_lo, double t_hi, std::size_t n);

/// Eigenvalues with the scalar weight each mode carries in an observation:
///   obs(t) = sum_k E_{alpha,1}(-lambda_k^beta t^alpha) w_k.
struct ModalSeries {
    std::vector<double> eigenvalues;
    std::vector<double> weights;
};

/// w_k = (a, phi_k)_h phi_k(x0).
ModalSeries pointwise_modes(const Spectrum& spectrum, std::span<const double> a, std::size_t sensor);
/// w_k = (a, phi_k)_h (rho, phi_k)_h.
ModalSeries weighted_modes(const Spectrum& spectrum, std::span<const double> a, std::span<const double> rho);

struct TruncationConfig {
    /// Tail bound allowed relative to the running sum at the smallest time.
    double rel_tol = 1e-12;
    /// Lower limit for C in |E_{alpha,1}(-x)| <= C / (1 + x); for alpha > 1
    /// a scanned supremum is used when larger.
    double bound_constant = 2.0;
    double ml_accuracy = 1e-12;
};

struct TruncationReport {
    std::size_t modes_used = 0;
    std::size_t modes_available = 0;
    double tail_bound = 0.0;
};

/// Sums the modal series at each time, ascending in k. The number of modes K
/// is the smallest for which sum_{k>K} |w_k| C/(1 + lambda_k^beta t_min^alpha)
/// is below rel_tol times the magnitude of the K-term sum at t_min.
/// Throws TruncationFailure when no K qualifies (non-finite data).
std::vector<double> evaluate_modal_series(const ModalSeries& series, double alpha, double beta,
                                          std::span<const double> times, const TruncationConfig& config = {},
                                          TruncationReport* report = nullptr);

TimeSeries solve_pointwise(const ProblemSpec& problem, const Spectrum& spectrum, const TruncationConfig& config = {},
                           TruncationReport* report = nullptr);

/// Nodal solution at one time t > 0, truncated by the same rule in the max norm.
std::vector<double> solve_field(const ProblemSpec& problem, const Spectrum& spectrum, double t,
                                const TruncationConfig& config = {}, TruncationReport* report = nullptr);

/// Observation int u(x, t) rho(x) dx at the problem's times.
TimeSeries observe_weighted(const ProblemSpec& problem, const Spectrum& spectrum, std::span<const double> rho,
                            const TruncationConfig& config = {}, TruncationReport* report = nullptr);

/// Large-time law u(x0, t) ~ p / (Gamma(1 - alpha) t^alpha), p = (A^{-beta} a)(x0).
struct LeadingTerm {
    double alpha = 0.5;
    double p = 0.0;
    /// 1 / Gamma(1 - alpha).
    double gamma_factor = 0.0;

    double operator()(double t) const;
};

LeadingTerm asymptotic_leading(const ProblemSpec& problem, const Spectrum& spectrum);

/// Smallest grid time T* after which |u - law| <= share |law| at every later
/// grid time; nullopt if the last sample is still outside. `series` must be the
/// problem's pointwise solution.
std::optional<double> leading_dominance_time(const LeadingTerm& law, const TimeSeries& series, double share = 0.1);

/// Multiplies each value by (1 + level xi_i) with xi_i standard normal from
/// the counter-based generator below. level == 0 returns the series unchanged.
TimeSeries add_noise(const TimeSeries& series, double level, std::uint64_t seed);

/// SplitMix64 output for (seed, counter); stateless and portable.
std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter);
/// Standard normal number i of the stream `seed` (Box-Muller on counter pairs).
double standard_normal(std::uint64_t seed, std::uint64_t index);

/// CSV with header `t,u`, 17 significant digits, LF endings.
std::string to_csv(const TimeSeries& series);
/// CSV with header `t,u_clean,u_noisy`.
std::string to_csv(const TimeSeries& clean, const TimeSeries& noisy);
/// Reads `t,u` or `t,u_clean,u_noisy` (the noisy column is taken). Throws
/// ParseError with a line number on malformed input.
TimeSeries parse_csv(const std::string& text);

} // namespace fracdiff
