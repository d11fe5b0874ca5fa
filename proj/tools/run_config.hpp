#pragma once

#include "fracdiff/forward_solver.hpp"
#include "fracdiff/order_recovery.hpp"
#include "fracdiff/spectral_operator.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fracdiff::cli {

inline constexpr int kConfigVersion = 1;

/// constant: value; linear: value + slope x; scaled: constant diffusivity
/// chosen so that the discrete lambda_1 equals `value` (diffusivity only).
struct CoefficientSpec {
    std::string kind = "constant";
    double value = 1.0;
    double slope = 0.0;
};

/// parabola: scale x (L - x); eigenmode: scale phi_index (1-based).
struct InitialSpec {
    std::string kind = "parabola";
    std::size_t index = 1;
    double scale = 1.0;
};

struct TimeGridSpec {
    std::string kind = "geometric";
    double t_lo = 0.1;
    double t_hi = 1e4;
    std::size_t count = 200;
};

struct AxisSpec {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 1;

    std::vector<double> values() const;
};

struct RunConfig {
    std::string preset;

    double length = 1.0;
    std::size_t mesh_points = 63;
    CoefficientSpec diffusivity;
    CoefficientSpec potential{"constant", 0.0, 0.0};

    double alpha = 0.5;
    double beta = 0.5;
    InitialSpec initial;
    TimeGridSpec times;

    /// pointwise at node `sensor`, or weighted with `weight` (uniform | parabola).
    std::string observation = "pointwise";
    std::size_t sensor = 31;
    std::string weight = "uniform";

    double noise_level = 0.0;
    std::uint64_t seed = 0;

    std::optional<FitWindow> window;
    WindowPolicy window_policy;
    int moment_orders = 3;
    double condition_limit = 1e8;
    AxisSpec landscape_alpha{0.02, 1.98, 50};
    AxisSpec landscape_beta{0.01, 0.99, 50};

    std::string output_directory = "out";
};

/// Preset defaults merged with the user's JSON (RFC 7386 merge patch), then
/// checked key by key. Throws ConfigError naming the offending JSON pointer,
/// or ParseError with line and column for malformed text.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Default document for a preset; ConfigError for unknown names.
nlohmann::json preset_defaults(const std::string& name);
std::vector<std::string> preset_names();

/// Everything a command needs, built from a RunConfig.
struct Experiment {
    OperatorSpec spec;
    Spectrum spectrum;
    ProblemSpec problem;
    std::vector<double> rho;
    ObservationModel model;
};

Experiment build_experiment(const RunConfig& config);

/// Clean observation of the configured problem.
TimeSeries observe(const Experiment& experiment, const TruncationConfig& truncation = {},
                   TruncationReport* report = nullptr);

RecoveryConfig recovery_config(const RunConfig& config);

} // namespace fracdiff::cli
