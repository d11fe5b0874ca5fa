#pragma once

#include "fracdiff/forward_solver.hpp"
#include "fracdiff/spectral_operator.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fracdiff {

struct FitWindow {
    double t_lo = 0.0;
    double t_hi = 0.0;
};

/// What the recovery knows about the observation: the modal weights it
/// produces plus the hypotheses of the uniqueness result.
struct ObservationModel {
    ModalSeries modes;
    /// Smallest 1-based mode with non-negligible weight and lambda != 1.
    std::optional<std::size_t> k0;
    /// Initial datum of one sign.
    bool one_signed = true;
};

ObservationModel pointwise_observation(const Spectrum& spectrum, std::span<const double> a, std::size_t sensor,
                                       double tol = 1e-8);
ObservationModel weighted_observation(const Spectrum& spectrum, std::span<const double> a,
                                      std::span<const double> rho, double tol = 1e-8);

struct AlphaFit {
    double alpha_hat = 0.0;
    /// p = (A^{-beta} a)(x0) implied by the fitted intercept.
    double amplitude_hat = 0.0;
    double r_squared = 0.0;
    std::size_t samples = 0;
    FitWindow window;
    /// Straight log-log slope before the two-term refinement.
    double alpha_loglog = 0.0;
    /// |q t^{-2 alpha}| / |P t^{-alpha}| at the window start, from the
    /// two-term fit (zero when not refined).
    double second_share = 0.0;
    bool refined = false;
};

/// Line fit of log|u| against log t on the window, optionally followed by a
/// two-term fit P t^{-alpha} + q t^{-2 alpha} (alpha by 1-D search, P and q by
/// linear least squares with 1/|u| weights).
/// Throws WindowTooNoisy (fewer than 8 samples, R^2 < 0.99 or slope outside
/// (-2, 0)) and SignChange.
AlphaFit estimate_alpha_loglog(const TimeSeries& series, FitWindow window, bool refine = true);

struct WindowPolicy {
    /// Candidate windows span this many decades ...
    double decades = 1.0;
    /// ... and are stepped back from the last sample by this much.
    double step_decades = 0.25;
    double max_second_share = 0.2;
};

/// Latest candidate window without a sign change whose two-term fit has a
/// second-term share at most max_second_share. Throws WindowTooNoisy when no
/// candidate qualifies.
AlphaFit select_window(const TimeSeries& series, const WindowPolicy& policy = {});

struct Moment {
    int ell = 0;
    double value = 0.0;
};

struct MomentFit {
    std::vector<Moment> moments;
    /// Orders dropped because 1 - alpha ell sits at a pole of Gamma.
    std::vector<int> excluded;
    /// Condition number of the column-equilibrated weighted design matrix.
    double condition = 0.0;

    /// Value for order ell, if fitted.
    std::optional<double> get(int ell) const;
};

struct MomentConfig {
    int orders = 3;
    /// ell is dropped when alpha ell is within this distance of a positive integer.
    double pole_exclusion = 1e-2;
    double condition_limit = 1e8;
};

/// Least-squares fit of u(t) ~ sum_ell (-1)^{ell+1} M_ell t^{-alpha ell} / Gamma(1 - alpha ell)
/// on the window, rows weighted by 1/|u|. Throws IllConditioned.
MomentFit moment_sequence(const TimeSeries& series, double alpha_hat, FitWindow window,
                          const MomentConfig& config = {});

/// sum_k w_k lambda_k^{-s}.
double modal_moment(const ModalSeries& modes, double s);

struct BetaSearchConfig {
    double step = 1e-3;
    /// Local minima of |f| without a sign change count as roots below this
    /// fraction of |M_1|.
    double root_tol = 1e-3;
    /// f varying less than this fraction of its scale over (0, 1) is flat.
    double flat_tol = 1e-9;
    /// Candidates whose consistency score is within this of the best survive.
    double ambiguity_tol = 1e-3;
};

struct BetaEstimate {
    double beta_hat = 0.0;
    /// Every root found, best consistency first.
    std::vector<double> candidates;
    /// Mean relative mismatch of the higher moments, aligned with candidates.
    std::vector<double> consistency;
};

/// Solves M_1 = sum_k w_k lambda_k^{-beta} on (0, 1) by grid scan and
/// bisection. Throws NoRoot (flat() when the equation does not involve beta)
/// and Ambiguous when several roots fit the higher moments equally well.
BetaEstimate estimate_beta_moments(const MomentFit& moments, const ModalSeries& modes,
                                   const BetaSearchConfig& config = {});

/// sum_i (u_model(t_i) - u_i)^2; +inf if the model cannot be evaluated.
double misfit(const TimeSeries& series, const ModalSeries& modes, double alpha, double beta,
              const TruncationConfig& truncation = {});

struct NelderMeadConfig {
    double initial_step = 0.05;
    double diameter_tol = 1e-6;
    int max_iterations = 500;
};

struct JointFit {
    double alpha = 0.0;
    double beta = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

/// Nelder-Mead on J(alpha, beta) over (0, 2) x (0, 1), vertices projected
/// back into the box. Throws StartOutOfBox and MaxIterations.
JointFit estimate_joint_lsq(const TimeSeries& series, const ModalSeries& modes, std::pair<double, double> init,
                            const NelderMeadConfig& config = {}, const TruncationConfig& truncation = {});

struct Landscape {
    std::vector<double> alpha_grid;
    std::vector<double> beta_grid;
    /// values[i * beta_grid.size() + j] = J(alpha_grid[i], beta_grid[j]).
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const { return values[i * beta_grid.size() + j]; }
};

/// Throws PreconditionViolation for grid points outside the admissible box.
Landscape residual_landscape(const TimeSeries& series, const ModalSeries& modes, std::vector<double> alpha_grid,
                             std::vector<double> beta_grid, const TruncationConfig& truncation = {});

/// True iff max over alpha rows of (row max - row min) / global max < rel_tol.
bool detect_beta_flat(const Landscape& landscape, double rel_tol);

/// Cells strictly below all of their (up to 8) neighbours.
std::vector<std::pair<std::size_t, std::size_t>> local_minima(const Landscape& landscape);

struct RecoveryConfig {
    std::optional<FitWindow> window;
    WindowPolicy window_policy;
    MomentConfig moments;
    BetaSearchConfig beta_search;
    NelderMeadConfig optimizer;
    TruncationConfig truncation;
};

struct RecoveryResult {
    double alpha_hat = 0.0;
    std::optional<double> beta_hat;
    double amplitude_hat = 0.0;
    double residual = 0.0;
    bool identifiable = false;
    FitWindow window;
    std::vector<std::string> warnings;

    struct Diagnostics {
        double alpha_loglog = 0.0;
        double alpha_refined = 0.0;
        double r_squared = 0.0;
        std::optional<double> beta_moments;
        std::vector<double> beta_candidates;
        std::vector<Moment> moments;
        double moment_condition = 0.0;
        int iterations = 0;
        std::optional<std::size_t> k0;
    } diagnostics;
};

/// Alpha from the log-log law, beta from the first moment, then the joint
/// least-squares refinement. Non-identifiable observations come back with
/// identifiable = false and no beta_hat.
RecoveryResult recover(const TimeSeries& series, const ObservationModel& model, const RecoveryConfig& config = {});

/// JSON object with keys alpha_hat, beta_hat (null when undetermined),
/// amplitude_hat, residual, identifiable, window, warnings, diagnostics.
std::string to_json(const RecoveryResult& result);

} // namespace fracdiff
