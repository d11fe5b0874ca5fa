#pragma once

#include "run_config.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fracdiff::cli {

enum ExitCode : int { kSuccess = 0, kFailure = 1, kNonIdentifiable = 2 };

struct MlRequest {
    double alpha = 0.5;
    double z_lo = -10.0;
    double z_hi = 0.0;
    std::size_t count = 101;
    /// linear, or log: |z| geometric between the endpoints (same sign, nonzero).
    std::string spacing = "linear";
};

/// CSV `z,E` with one row per point; header only for count = 0.
std::string cmd_ml(const MlRequest& request);

struct SolveOutput {
    std::string series_csv;
    std::string meta_json;
};

/// series.csv holds `t,u`, or `t,u_clean,u_noisy` when the config asks for noise.
SolveOutput cmd_solve(const RunConfig& config);

struct RecoverOutput {
    RecoveryResult result;
    std::string json;
    int exit_code = kSuccess;
};

RecoverOutput cmd_recover(const RunConfig& config, const TimeSeries& series);

struct LandscapeOutput {
    Landscape landscape;
    std::vector<std::pair<std::size_t, std::size_t>> minima;
    bool beta_flat = false;
    /// First row `alpha/beta,b_1,...`; then `a_i,J(a_i,b_1),...`.
    std::string csv;
};

/// Uses `series` when given, otherwise the configured observation (with noise
/// if configured). grid overrides the axis counts.
LandscapeOutput cmd_landscape(const RunConfig& config, const std::optional<TimeSeries>& series,
                              std::optional<std::pair<std::size_t, std::size_t>> grid = std::nullopt);

/// Parses "AxB".
std::pair<std::size_t, std::size_t> parse_grid(const std::string& text);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string measure;
    double value = 0.0;
    double tolerance = 0.0;
};

std::vector<std::string> validation_checks();

/// Runs the named checks in the order given. `fault` names a check whose
/// tolerance is replaced by one it cannot meet.
std::vector<CheckResult> cmd_validate(const std::vector<std::string>& selection,
                                      const std::optional<std::string>& fault = std::nullopt);

std::string format_report(const std::vector<CheckResult>& results);

} // namespace fracdiff::cli
