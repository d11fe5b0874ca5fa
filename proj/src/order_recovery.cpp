#include "fracdiff/order_recovery.hpp"

#include "fracdiff/errors.hpp"
#include "fracdiff/mittag_leffler.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace fracdiff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct WindowSamples {
    std::vector<double> t;
    std::vector<double> u;
};

WindowSamples window_samples(const TimeSeries& series, FitWindow window)
{
    series.validate();
    if (!(window.t_lo > 0.0 && window.t_hi > window.t_lo)) {
        throw PreconditionViolation("fit window needs 0 < t_lo < t_hi");
    }
    WindowSamples out;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        if (series.times[i] >= window.t_lo && series.times[i] <= window.t_hi) {
            out.t.push_back(series.times[i]);
            out.u.push_back(series.values[i]);
        }
    }
    return out;
}

/// Minimises f on [lo, hi] by golden-section search.
template <class F>
double golden_minimize(F f, double lo, double hi, double tol)
{
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo;
    double b = hi;
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return fc <= fd ? c : d;
}

/// Weighted two-term fit u ~ P t^{-alpha} + q t^{-2 alpha} for fixed alpha.
struct TwoTerm {
    double P = 0.0;
    double q = 0.0;
    double residual = kInf;
};

TwoTerm two_term_fit(const WindowSamples& w, double alpha)
{
    const auto m = static_cast<Eigen::Index>(w.t.size());
    Eigen::MatrixXd X(m, 2);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double scale = 1.0 / std::abs(w.u[k]);
        const double p1 = std::pow(w.t[k], -alpha);
        X(i, 0) = p1 * scale;
        X(i, 1) = p1 * p1 * scale;
        y(i) = w.u[k] * scale;
    }
    const Eigen::Vector2d c = X.colPivHouseholderQr().solve(y);
    TwoTerm out{c(0), c(1), (X * c - y).squaredNorm()};
    if (!std::isfinite(out.residual)) {
        out.residual = kInf;
    }
    return out;
}

bool near_pole(double alpha, int ell, double tol)
{
    const double x = alpha * ell;
    const double r = std::round(x);
    return r >= 1.0 && std::abs(x - r) < tol;
}

double project_alpha(double a)
{
    constexpr double kEdge = 1e-6;
    a = std::clamp(a, kEdge, 2.0 - kEdge);
    if (std::abs(a - 1.0) < 1e-9) {
        a = a < 1.0 ? 1.0 - 1e-9 : 1.0 + 1e-9;
    }
    return a;
}

double project_beta(double b)
{
    constexpr double kEdge = 1e-6;
    return std::clamp(b, kEdge, 1.0 - kEdge);
}

} // namespace

ObservationModel pointwise_observation(const Spectrum& spectrum, std::span<const double> a, std::size_t sensor,
                                       double tol)
{
    const IdentifiabilityReport report = check_identifiability(spectrum, a, sensor, tol);
    ObservationModel out;
    out.modes.eigenvalues.assign(spectrum.eigenvalues().begin(), spectrum.eigenvalues().end());
    out.modes.weights = report.weights;
    out.k0 = report.k0;
    out.one_signed = report.one_signed;
    return out;
}

ObservationModel weighted_observation(const Spectrum& spectrum, std::span<const double> a,
                                      std::span<const double> rho, double tol)
{
    if (a.size() != spectrum.size() || rho.size() != spectrum.size()) {
        throw PreconditionViolation("weighted_observation: vectors do not match the mesh");
    }
    ObservationModel out;
    out.modes = weighted_modes(spectrum, a, rho);
    const double h = spectrum.mesh_step();
    const double scale = norm_h(a, h) * norm_h(rho, h);
    out.k0 = first_identifiable_mode(out.modes.eigenvalues, out.modes.weights, tol * scale, tol);
    out.one_signed = std::all_of(a.begin(), a.end(), [](double x) { return x >= 0.0; }) ||
                     std::all_of(a.begin(), a.end(), [](double x) { return x <= 0.0; });
    return out;
}

AlphaFit estimate_alpha_loglog(const TimeSeries& series, FitWindow window, bool refine)
{
    const WindowSamples w = window_samples(series, window);
    const std::size_t m = w.t.size();
    if (m < 8) {
        throw WindowTooNoisy("fit window holds " + std::to_string(m) + " samples, need at least 8");
    }
    const double sign = w.u.front() > 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!(w.u[i] * sign > 0.0)) {
            throw SignChange("observation changes sign (or vanishes) at t = " + std::to_string(w.t[i]) +
                             " inside the fit window");
        }
    }

    double mx = 0.0;
    double my = 0.0;
    std::vector<double> x(m);
    std::vector<double> y(m);
    for (std::size_t i = 0; i < m; ++i) {
        x[i] = std::log(w.t[i]);
        y[i] = std::log(std::abs(w.u[i]));
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;

    AlphaFit out;
    out.samples = m;
    out.window = {w.t.front(), w.t.back()};
    out.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    out.alpha_loglog = -slope;
    out.alpha_hat = -slope;
    if (out.r_squared < 0.99) {
        throw WindowTooNoisy("log-log fit R^2 = " + std::to_string(out.r_squared) + " is below 0.99");
    }
    if (!(out.alpha_hat > 0.0 && out.alpha_hat < 2.0)) {
        throw WindowTooNoisy("log-log slope " + std::to_string(slope) + " outside (-2, 0)");
    }
    double P = sign * std::exp(intercept);

    if (refine) {
        // At alpha/2 the q term alone reproduces t^{-alpha}; keep the search
        // well away from that alias.
        const double lo = std::max(out.alpha_hat * (2.0 / 3.0), 0.005);
        const double hi = std::min(out.alpha_hat * (4.0 / 3.0), 1.995);
        auto objective = [&](double a) { return two_term_fit(w, a).residual; };
        constexpr int kScan = 100;
        int best = 0;
        double best_value = kInf;
        for (int i = 0; i <= kScan; ++i) {
            const double v = objective(lo + (hi - lo) * i / kScan);
            if (v < best_value) {
                best_value = v;
                best = i;
            }
        }
        const double step = (hi - lo) / kScan;
        const double a_lo = std::max(lo, lo + (best - 1) * step);
        const double a_hi = std::min(hi, lo + (best + 1) * step);
        const double a = golden_minimize(objective, a_lo, a_hi, 1e-10);
        const TwoTerm fit = two_term_fit(w, a);
        const double share = std::abs(fit.q / fit.P) * std::pow(out.window.t_lo, -a);
        if (std::isfinite(fit.residual) && fit.P != 0.0 && std::abs(a - 1.0) > 1e-6 && share < 1.0) {
            out.alpha_hat = a;
            P = fit.P;
            out.second_share = share;
            out.refined = true;
        } else {
            out.second_share = std::isfinite(share) ? share : kInf;
        }
    }
    out.amplitude_hat = P / recip_gamma(1.0 - out.alpha_hat);
    return out;
}

AlphaFit select_window(const TimeSeries& series, const WindowPolicy& policy)
{
    series.validate();
    if (series.times.empty()) {
        throw WindowTooNoisy("empty series");
    }
    const double first = series.times.front();
    const double last = series.times.back();
    std::string last_problem = "series spans less than one window";
    for (int j = 0;; ++j) {
        const double hi = last * std::pow(10.0, -policy.step_decades * j);
        const double lo = hi * std::pow(10.0, -policy.decades);
        if (lo < first * (1.0 - 1e-12)) {
            break;
        }
        try {
            AlphaFit fit = estimate_alpha_loglog(series, {lo, hi}, true);
            if (fit.second_share <= policy.max_second_share) {
                return fit;
            }
            last_problem = "second-term share " + std::to_string(fit.second_share) + " on [" + std::to_string(lo) +
                           ", " + std::to_string(hi) + "]";
        } catch (const WindowTooNoisy& e) {
            last_problem = e.what();
        } catch (const SignChange& e) {
            last_problem = e.what();
        }
    }
    throw WindowTooNoisy("no asymptotic window found: " + last_problem);
}

std::optional<double> MomentFit::get(int ell) const
{
    for (const Moment& m : moments) {
        if (m.ell == ell) {
            return m.value;
        }
    }
    return std::nullopt;
}

MomentFit moment_sequence(const TimeSeries& series, double alpha_hat, FitWindow window, const MomentConfig& config)
{
    if (!(alpha_hat > 0.0 && alpha_hat < 2.0)) {
        throw PreconditionViolation("moment_sequence: alpha_hat must lie in (0, 2)");
    }
    if (config.orders < 1) {
        throw PreconditionViolation("moment_sequence: need at least one order");
    }
    MomentFit out;
    std::vector<int> ells;
    for (int ell = 1; ell <= config.orders; ++ell) {
        if (near_pole(alpha_hat, ell, config.pole_exclusion)) {
            out.excluded.push_back(ell);
        } else {
            ells.push_back(ell);
        }
    }
    if (ells.empty() || ells.front() != 1) {
        throw PreconditionViolation("moment_sequence: alpha_hat too close to 1");
    }
    const WindowSamples w = window_samples(series, window);
    const auto m = static_cast<Eigen::Index>(w.t.size());
    const auto cols = static_cast<Eigen::Index>(ells.size());
    if (m < cols + 2) {
        throw IllConditioned("moment_sequence: window holds too few samples");
    }
    Eigen::MatrixXd X(m, cols);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (w.u[k] == 0.0) {
            throw IllConditioned("moment_sequence: zero sample in window");
        }
        const double scale = 1.0 / std::abs(w.u[k]);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const int ell = ells[static_cast<std::size_t>(c)];
            const double sign = ell % 2 == 1 ? 1.0 : -1.0;
            X(i, c) = sign * recip_gamma(1.0 - alpha_hat * ell) * std::pow(w.t[k], -alpha_hat * ell) * scale;
        }
        y(i) = w.u[k] * scale;
    }
    Eigen::VectorXd norms(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        norms(c) = X.col(c).norm();
        X.col(c) /= norms(c);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    out.condition = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : kInf;
    if (!(out.condition <= config.condition_limit)) {
        throw IllConditioned("moment_sequence: condition number " + std::to_string(out.condition) +
                             " exceeds the limit; widen the window or lower the order");
    }
    const Eigen::VectorXd c = svd.solve(y);
    for (Eigen::Index k = 0; k < cols; ++k) {
        out.moments.push_back({ells[static_cast<std::size_t>(k)], c(k) / norms(k)});
    }
    return out;
}

double modal_moment(const ModalSeries& modes, double s)
{
    double acc = 0.0;
    for (std::size_t k = 0; k < modes.weights.size(); ++k) {
        acc += modes.weights[k] * std::pow(modes.eigenvalues[k], -s);
    }
    return acc;
}

BetaEstimate estimate_beta_moments(const MomentFit& moments, const ModalSeries& modes, const BetaSearchConfig& config)
{
    const std::optional<double> m1 = moments.get(1);
    if (!m1) {
        throw PreconditionViolation("estimate_beta_moments: first moment missing");
    }
    if (!(config.step > 0.0 && config.step < 0.5)) {
        throw PreconditionViolation("estimate_beta_moments: bad scan step");
    }
    auto f = [&](double beta) { return modal_moment(modes, beta) - *m1; };

    const auto count = static_cast<int>(std::lround(1.0 / config.step));
    std::vector<double> grid;
    std::vector<double> values;
    for (int j = 1; j < count; ++j) {
        grid.push_back(j * config.step);
        values.push_back(f(grid.back()));
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double weight_scale = 0.0;
    for (double w : modes.weights) {
        weight_scale += std::abs(w);
    }
    const double scale = std::max(std::abs(*m1), weight_scale);
    if (*hi_it - *lo_it <= config.flat_tol * scale) {
        throw NoRoot("first-moment equation does not depend on beta", true);
    }

    std::vector<double> roots;
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
        if (values[j] == 0.0) {
            roots.push_back(grid[j]);
        } else if (values[j] * values[j + 1] < 0.0) {
            double a = grid[j];
            double b = grid[j + 1];
            double fa = values[j];
            for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
                const double mid = 0.5 * (a + b);
                const double fm = f(mid);
                if (fm == 0.0) {
                    a = b = mid;
                    break;
                }
                if (fa * fm < 0.0) {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
    }
    // Touching minima of |f| that miss zero only through noise in M_1.
    for (std::size_t j = 1; j + 1 < grid.size(); ++j) {
        const double v = std::abs(values[j]);
        if (v <= std::abs(values[j - 1]) && v <= std::abs(values[j + 1]) && values[j - 1] * values[j] > 0.0 &&
            values[j] * values[j + 1] > 0.0 && v <= config.root_tol * std::abs(*m1)) {
            const double r =
                golden_minimize([&](double b) { return std::abs(f(b)); }, grid[j - 1], grid[j + 1], 1e-12);
            const bool duplicate =
                std::any_of(roots.begin(), roots.end(), [&](double x) { return std::abs(x - r) < 2.0 * config.step; });
            if (!duplicate) {
                roots.push_back(r);
            }
        }
    }
    if (roots.empty()) {
        throw NoRoot("no beta in (0, 1) matches the first moment", false);
    }

    std::vector<std::pair<double, double>> ranked;
    for (double r : roots) {
        double score = 0.0;
        int used = 0;
        for (const Moment& m : moments.moments) {
            if (m.ell < 2) {
                continue;
            }
            const double denom = std::max(std::abs(m.value), std::numeric_limits<double>::min());
            score += std::abs(modal_moment(modes, r * m.ell) - m.value) / denom;
            ++used;
        }
        ranked.emplace_back(used > 0 ? score / used : 0.0, r);
    }
    std::sort(ranked.begin(), ranked.end());
    BetaEstimate out;
    for (const auto& [score, r] : ranked) {
        out.candidates.push_back(r);
        out.consistency.push_back(score);
    }
    out.beta_hat = out.candidates.front();
    const auto survivors = std::count_if(out.consistency.begin(), out.consistency.end(),
                                         [&](double s) { return s <= out.consistency.front() + config.ambiguity_tol; });
    if (survivors >= 2) {
        throw Ambiguous(std::to_string(survivors) + " beta roots fit the higher moments equally well", out.candidates);
    }
    return out;
}

double misfit(const TimeSeries& series, const ModalSeries& modes, double alpha, double beta,
              const TruncationConfig& truncation)
{
    std::vector<double> model;
    try {
        model = evaluate_modal_series(modes, alpha, beta, series.times, truncation);
    } catch (const Error&) {
        return kInf;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const double d = model[i] - series.values[i];
        acc += d * d;
    }
    return std::isfinite(acc) ? acc : kInf;
}

namespace {

// A few Gauss-Newton steps with a central-difference Jacobian, each kept only
// if it lowers J. Takes the simplex result down to the rounding floor.
void polish(const TimeSeries& series, const ModalSeries& modes, const TruncationConfig& truncation, double& alpha,
            double& beta, double& value)
{
    auto model = [&](double a, double b) { return evaluate_modal_series(modes, a, b, series.times, truncation); };
    constexpr double h = 1e-6;
    for (int step = 0; step < 4; ++step) {
        if (alpha - h <= 0.0 || alpha + h >= 2.0 || std::abs(alpha - 1.0) <= h || beta - h <= 0.0 || beta + h >= 1.0) {
            return;
        }
        const auto m = static_cast<Eigen::Index>(series.times.size());
        Eigen::MatrixXd jac(m, 2);
        Eigen::VectorXd r(m);
        try {
            const auto u0 = model(alpha, beta);
            const auto ap = model(alpha + h, beta);
            const auto am = model(alpha - h, beta);
            const auto bp = model(alpha, beta + h);
            const auto bm = model(alpha, beta - h);
            for (Eigen::Index i = 0; i < m; ++i) {
                const auto k = static_cast<std::size_t>(i);
                jac(i, 0) = (ap[k] - am[k]) / (2.0 * h);
                jac(i, 1) = (bp[k] - bm[k]) / (2.0 * h);
                r(i) = series.values[k] - u0[k];
            }
        } catch (const Error&) {
            return;
        }
        const Eigen::Vector2d delta = jac.colPivHouseholderQr().solve(r);
        if (!delta.allFinite()) {
            return;
        }
        const double a1 = project_alpha(alpha + delta(0));
        const double b1 = project_beta(beta + delta(1));
        const double v1 = misfit(series, modes, a1, b1, truncation);
        if (!(v1 < value)) {
            return;
        }
        alpha = a1;
        beta = b1;
        value = v1;
        if (delta.norm() < 1e-12) {
            return;
        }
    }
}

} // namespace

JointFit estimate_joint_lsq(const TimeSeries& series, const ModalSeries& modes, std::pair<double, double> init,
                            const NelderMeadConfig& config, const TruncationConfig& truncation)
{
    series.validate();
    const auto [a0, b0] = init;
    if (!(a0 > 0.0 && a0 < 2.0) || std::abs(a0 - 1.0) <= 1e-12 || !(b0 > 0.0 && b0 < 1.0)) {
        throw StartOutOfBox("joint fit start (" + std::to_string(a0) + ", " + std::to_string(b0) +
                            ") outside (0, 2)\\{1} x (0, 1)");
    }
    using Point = std::array<double, 2>;
    auto project = [](Point p) { return Point{project_alpha(p[0]), project_beta(p[1])}; };
    auto J = [&](const Point& p) { return misfit(series, modes, p[0], p[1], truncation); };

    std::array<Point, 3> x{project({a0, b0}), project({a0 + config.initial_step, b0}),
                           project({a0, b0 + config.initial_step})};
    if (x[1] == x[0]) {
        x[1] = project({a0 - config.initial_step, b0});
    }
    if (x[2] == x[0]) {
        x[2] = project({a0, b0 - config.initial_step});
    }
    std::array<double, 3> fx{J(x[0]), J(x[1]), J(x[2])};

    auto order = [&]() {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int i, int j) { return fx[i] < fx[j]; });
        const std::array<Point, 3> xs{x[idx[0]], x[idx[1]], x[idx[2]]};
        const std::array<double, 3> fs{fx[idx[0]], fx[idx[1]], fx[idx[2]]};
        x = xs;
        fx = fs;
    };
    auto diameter = [&]() {
        double d = 0.0;
        for (int i = 1; i < 3; ++i) {
            d = std::max(d, std::hypot(x[i][0] - x[0][0], x[i][1] - x[0][1]));
        }
        return d;
    };
    auto along = [&](const Point& c, const Point& from, double t) {
        return project({c[0] + t * (from[0] - c[0]), c[1] + t * (from[1] - c[1])});
    };

    for (int it = 0; it < config.max_iterations; ++it) {
        order();
        if (diameter() < config.diameter_tol) {
            JointFit fit{x[0][0], x[0][1], fx[0], it};
            polish(series, modes, truncation, fit.alpha, fit.beta, fit.residual);
            return fit;
        }
        const Point c{0.5 * (x[0][0] + x[1][0]), 0.5 * (x[0][1] + x[1][1])};
        const Point xr = along(c, x[2], -1.0);
        const double fr = J(xr);
        if (fr < fx[0]) {
            const Point xe = along(c, x[2], -2.0);
            const double fe = J(xe);
            if (fe < fr) {
                x[2] = xe;
                fx[2] = fe;
            } else {
                x[2] = xr;
                fx[2] = fr;
            }
            continue;
        }
        if (fr < fx[1]) {
            x[2] = xr;
            fx[2] = fr;
            continue;
        }
        const bool outside = fr < fx[2];
        const Point xc = outside ? along(c, xr, 0.5) : along(c, x[2], 0.5);
        const double fc = J(xc);
        if (fc < (outside ? fr : fx[2])) {
            x[2] = xc;
            fx[2] = fc;
            continue;
        }
        for (int i = 1; i < 3; ++i) {
            x[i] = along(x[0], x[i], 0.5);
            fx[i] = J(x[i]);
        }
    }
    order();
    throw MaxIterations("joint fit did not reach simplex diameter " + std::to_string(config.diameter_tol) +
                            " in " + std::to_string(config.max_iterations) + " iterations",
                        {x[0][0], x[0][1]}, fx[0]);
}

Landscape residual_landscape(const TimeSeries& series, const ModalSeries& modes, std::vector<double> alpha_grid,
                             std::vector<double> beta_grid, const TruncationConfig& truncation)
{
    series.validate();
    for (double a : alpha_grid) {
        if (!(a > 0.0 && a < 2.0) || std::abs(a - 1.0) <= 1e-12) {
            throw PreconditionViolation("residual_landscape: alpha grid value " + std::to_string(a) +
                                        " outside (0, 2)\\{1}");
        }
    }
    for (double b : beta_grid) {
        if (!(b > 0.0 && b < 1.0)) {
            throw PreconditionViolation("residual_landscape: beta grid value " + std::to_string(b) +
                                        " outside (0, 1)");
        }
    }
    Landscape out;
    out.values.reserve(alpha_grid.size() * beta_grid.size());
    for (double a : alpha_grid) {
        for (double b : beta_grid) {
            out.values.push_back(misfit(series, modes, a, b, truncation));
        }
    }
    out.alpha_grid = std::move(alpha_grid);
    out.beta_grid = std::move(beta_grid);
    return out;
}

bool detect_beta_flat(const Landscape& landscape, double rel_tol)
{
    if (landscape.values.empty()) {
        return true;
    }
    const double global = *std::max_element(landscape.values.begin(), landscape.values.end());
    if (!(global > 0.0)) {
        return true;
    }
    const std::size_t nb = landscape.beta_grid.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < landscape.alpha_grid.size(); ++i) {
        const auto row = landscape.values.begin() + static_cast<std::ptrdiff_t>(i * nb);
        const auto [lo, hi] = std::minmax_element(row, row + static_cast<std::ptrdiff_t>(nb));
        worst = std::max(worst, *hi - *lo);
    }
    return worst / global < rel_tol;
}

std::vector<std::pair<std::size_t, std::size_t>> local_minima(const Landscape& landscape)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const auto na = static_cast<long>(landscape.alpha_grid.size());
    const auto nb = static_cast<long>(landscape.beta_grid.size());
    for (long i = 0; i < na; ++i) {
        for (long j = 0; j < nb; ++j) {
            const double v = landscape.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (!std::isfinite(v)) {
                continue;
            }
            bool minimum = true;
            for (long di = -1; di <= 1 && minimum; ++di) {
                for (long dj = -1; dj <= 1; ++dj) {
                    const long ii = i + di;
                    const long jj = j + dj;
                    if ((di == 0 && dj == 0) || ii < 0 || jj < 0 || ii >= na || jj >= nb) {
                        continue;
                    }
                    if (!(v < landscape.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)))) {
                        minimum = false;
                        break;
                    }
                }
            }
            if (minimum) {
                out.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            }
        }
    }
    return out;
}

RecoveryResult recover(const TimeSeries& series, const ObservationModel& model, const RecoveryConfig& config)
{
    series.validate();
    RecoveryResult r;
    r.diagnostics.k0 = model.k0;
    if (!model.one_signed) {
        r.warnings.push_back("initial datum changes sign: sign condition for uniqueness not met");
    }

    const AlphaFit af = config.window ? estimate_alpha_loglog(series, *config.window, true)
                                      : select_window(series, config.window_policy);
    r.window = af.window;
    r.diagnostics.alpha_loglog = af.alpha_loglog;
    r.diagnostics.alpha_refined = af.alpha_hat;
    r.diagnostics.r_squared = af.r_squared;
    const double alpha0 = project_alpha(af.alpha_hat);
    if (std::abs(alpha0 - 1.0) < 1e-3) {
        r.warnings.push_back("log-log alpha estimate is within 1e-3 of 1");
    }

    bool identifiable = model.k0.has_value();
    if (!identifiable) {
        r.warnings.push_back("beta undetermined: no mode with nonzero weight and eigenvalue different from 1");
    }

    std::vector<double> starts;
    if (identifiable) {
        std::optional<MomentFit> mf;
        MomentConfig mc = config.moments;
        while (mc.orders >= 1 && !mf) {
            try {
                mf = moment_sequence(series, alpha0, r.window, mc);
            } catch (const IllConditioned& e) {
                r.warnings.push_back(std::string("moment fit with ") + std::to_string(mc.orders) +
                                     " orders: " + e.what());
                --mc.orders;
            }
        }
        if (mf) {
            r.diagnostics.moments = mf->moments;
            r.diagnostics.moment_condition = mf->condition;
            try {
                const BetaEstimate be = estimate_beta_moments(*mf, model.modes, config.beta_search);
                starts.push_back(be.beta_hat);
                r.diagnostics.beta_moments = be.beta_hat;
                r.diagnostics.beta_candidates = be.candidates;
            } catch (const Ambiguous& e) {
                r.warnings.push_back(std::string("moment equation: ") + e.what());
                starts = e.candidates();
                r.diagnostics.beta_candidates = e.candidates();
            } catch (const NoRoot& e) {
                if (e.flat()) {
                    identifiable = false;
                    r.warnings.push_back("beta undetermined: the observation does not depend on beta");
                } else {
                    r.warnings.push_back(std::string("moment equation: ") + e.what());
                }
            }
        }
    }

    if (identifiable) {
        if (starts.empty()) {
            // Coarse misfit scan along beta at the log-log alpha.
            double best = kInf;
            double best_beta = 0.5;
            for (int j = 1; j < 20; ++j) {
                const double b = 0.05 * j;
                const double v = misfit(series, model.modes, alpha0, b, config.truncation);
                if (v < best) {
                    best = v;
                    best_beta = b;
                }
            }
            starts.push_back(best_beta);
            r.warnings.push_back("joint fit started from a coarse beta scan");
        }
        std::optional<JointFit> best;
        for (double b : starts) {
            JointFit fit;
            try {
                fit = estimate_joint_lsq(series, model.modes, {alpha0, project_beta(b)}, config.optimizer,
                                         config.truncation);
            } catch (const MaxIterations& e) {
                r.warnings.push_back(e.what());
                fit = {e.best()[0], e.best()[1], e.value(), config.optimizer.max_iterations};
            }
            if (!best || fit.residual < best->residual) {
                best = fit;
            }
        }
        r.alpha_hat = best->alpha;
        r.beta_hat = best->beta;
        r.residual = best->residual;
        r.diagnostics.iterations = best->iterations;
        r.amplitude_hat = modal_moment(model.modes, best->beta);
    } else {
        // beta is irrelevant here; refine alpha alone at a fixed beta.
        constexpr double kBeta = 0.5;
        auto J = [&](double a) { return misfit(series, model.modes, project_alpha(a), kBeta, config.truncation); };
        const double lo = std::max(alpha0 - 0.1, 1e-6);
        const double hi = std::min(alpha0 + 0.1, 2.0 - 1e-6);
        r.alpha_hat = project_alpha(golden_minimize(J, lo, hi, 1e-9));
        r.residual = J(r.alpha_hat);
        r.amplitude_hat = af.amplitude_hat;
    }
    r.identifiable = identifiable;
    return r;
}

std::string to_json(const RecoveryResult& result)
{
    nlohmann::ordered_json j;
    j["alpha_hat"] = result.alpha_hat;
    j["beta_hat"] = result.beta_hat ? nlohmann::ordered_json(*result.beta_hat) : nlohmann::ordered_json(nullptr);
    j["amplitude_hat"] = result.amplitude_hat;
    j["residual"] = result.residual;
    j["identifiable"] = result.identifiable;
    j["window"] = {result.window.t_lo, result.window.t_hi};
    j["warnings"] = result.warnings;
    const auto& d = result.diagnostics;
    nlohmann::ordered_json diag;
    diag["alpha_loglog"] = d.alpha_loglog;
    diag["alpha_refined"] = d.alpha_refined;
    diag["r_squared"] = d.r_squared;
    diag["beta_moments"] = d.beta_moments ? nlohmann::ordered_json(*d.beta_moments) : nlohmann::ordered_json(nullptr);
    diag["beta_candidates"] = d.beta_candidates;
    nlohmann::ordered_json moments = nlohmann::ordered_json::array();
    for (const Moment& m : d.moments) {
        moments.push_back({{"ell", m.ell}, {"value", m.value}});
    }
    diag["moments"] = moments;
    diag["moment_condition"] = d.moment_condition;
    diag["iterations"] = d.iterations;
    diag["k0"] = d.k0 ? nlohmann::ordered_json(*d.k0) : nlohmann::ordered_json(nullptr);
    j["diagnostics"] = diag;
    return j.dump(2) + "\n";
}

} // namespace fracdiff
