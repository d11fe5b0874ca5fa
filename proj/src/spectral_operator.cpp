#include "fracdiff/spectral_operator.hpp"

#include "fracdiff/errors.hpp"
#include "fracdiff/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace fracdiff {

namespace {

void require_same_size(std::size_t expected, std::size_t got, const char* what)
{
    if (expected != got) {
        throw PreconditionViolation(std::string(what) + ": expected a vector of length " + std::to_string(expected) +
                                    ", got " + std::to_string(got));
    }
}

} // namespace

double inner_h(std::span<const double> u, std::span<const double> v, double h)
{
    require_same_size(u.size(), v.size(), "inner_h");
    return h * std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
}

double norm_h(std::span<const double> u, double h)
{
    return std::sqrt(inner_h(u, u, h));
}

DiscreteOperator::DiscreteOperator(std::vector<double> diagonal, std::vector<double> off_diagonal, double mesh_step)
    : diagonal_(std::move(diagonal)), off_diagonal_(std::move(off_diagonal)), mesh_step_(mesh_step)
{
    if (diagonal_.empty() || off_diagonal_.size() + 1 != diagonal_.size()) {
        throw PreconditionViolation("DiscreteOperator: inconsistent band sizes");
    }
    if (!(mesh_step_ > 0.0)) {
        throw PreconditionViolation("DiscreteOperator: mesh step must be positive");
    }
}

std::vector<double> DiscreteOperator::apply(std::span<const double> v) const
{
    require_same_size(size(), v.size(), "DiscreteOperator::apply");
    const std::size_t n = size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = diagonal_[i] * v[i];
        if (i > 0) {
            acc += off_diagonal_[i - 1] * v[i - 1];
        }
        if (i + 1 < n) {
            acc += off_diagonal_[i] * v[i + 1];
        }
        out[i] = acc;
    }
    return out;
}

std::vector<double> DiscreteOperator::solve_shifted(double shift, std::span<const double> rhs) const
{
    return solve_scaled(1.0, shift, rhs);
}

std::vector<double> DiscreteOperator::solve_scaled(double scale, double shift, std::span<const double> rhs) const
{
    require_same_size(size(), rhs.size(), "DiscreteOperator::solve_scaled");
    const std::size_t n = size();
    std::vector<double> upper(n);
    std::vector<double> w(rhs.begin(), rhs.end());
    double pivot = scale * diagonal_[0] + shift;
    upper[0] = n > 1 ? scale * off_diagonal_[0] / pivot : 0.0;
    w[0] /= pivot;
    for (std::size_t i = 1; i < n; ++i) {
        const double sub = scale * off_diagonal_[i - 1];
        pivot = scale * diagonal_[i] + shift - sub * upper[i - 1];
        if (i + 1 < n) {
            upper[i] = scale * off_diagonal_[i] / pivot;
        }
        w[i] = (w[i] - sub * w[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        w[i] -= upper[i] * w[i + 1];
    }
    return w;
}

bool DiscreteOperator::has_m_matrix_sign_pattern() const
{
    return std::all_of(diagonal_.begin(), diagonal_.end(), [](double d) { return d > 0.0; }) &&
           std::all_of(off_diagonal_.begin(), off_diagonal_.end(), [](double e) { return e <= 0.0; });
}

double DiscreteOperator::eigenvalue_upper_bound() const
{
    double bound = 0.0;
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        double radius = 0.0;
        if (i > 0) {
            radius += std::abs(off_diagonal_[i - 1]);
        }
        if (i + 1 < n) {
            radius += std::abs(off_diagonal_[i]);
        }
        bound = std::max(bound, diagonal_[i] + radius);
    }
    return bound;
}

double DiscreteOperator::eigenvalue_lower_bound() const
{
    const std::vector<double> ones(size(), 1.0);
    const std::vector<double> w = solve_shifted(0.0, ones);
    return 1.0 / *std::max_element(w.begin(), w.end());
}

DiscreteOperator discretize(const OperatorSpec& spec)
{
    if (spec.mesh_points < 3) {
        throw PreconditionViolation("discretize: need at least 3 interior nodes");
    }
    if (!(spec.length > 0.0)) {
        throw PreconditionViolation("discretize: interval length must be positive");
    }
    if (!(spec.ellipticity_bound > 0.0)) {
        throw PreconditionViolation("discretize: ellipticity bound must be positive");
    }
    const std::size_t n = spec.mesh_points;
    const double h = spec.mesh_step();
    const double inv_h2 = 1.0 / (h * h);

    auto diffusivity_at = [&](double x) {
        const double a = spec.diffusivity(x);
        if (!(a >= spec.ellipticity_bound)) {
            throw EllipticityViolated("discretize: diffusivity " + std::to_string(a) + " at x = " + std::to_string(x) +
                                      " is below the ellipticity bound " + std::to_string(spec.ellipticity_bound));
        }
        return a;
    };

    // Midpoint diffusivities a_{i+1/2}, i = 0..n (n + 1 faces).
    std::vector<double> faces(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        faces[i] = diffusivity_at((static_cast<double>(i) + 0.5) * h);
    }

    std::vector<double> diagonal(n);
    std::vector<double> off(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = spec.node(i);
        diffusivity_at(x);
        const double c = spec.potential(x);
        if (!(c <= 0.0)) {
            throw SignViolated("discretize: potential " + std::to_string(c) + " at x = " + std::to_string(x) +
                               " must be <= 0");
        }
        diagonal[i] = (faces[i] + faces[i + 1]) * inv_h2 - c;
        if (i + 1 < n) {
            off[i] = -faces[i + 1] * inv_h2;
        }
    }
    return DiscreteOperator(std::move(diagonal), std::move(off), h);
}

Spectrum::Spectrum(std::vector<double> eigenvalues, std::vector<double> modes, double mesh_step)
    : eigenvalues_(std::move(eigenvalues)), modes_(std::move(modes)), mesh_step_(mesh_step)
{
    if (modes_.size() != eigenvalues_.size() * eigenvalues_.size()) {
        throw PreconditionViolation("Spectrum: mode storage does not match eigenvalue count");
    }
}

std::span<const double> Spectrum::mode(std::size_t k) const
{
    if (k >= size()) {
        throw PreconditionViolation("Spectrum::mode: index out of range");
    }
    return std::span<const double>(modes_).subspan(k * size(), size());
}

std::vector<double> Spectrum::project(std::span<const double> v) const
{
    require_same_size(size(), v.size(), "Spectrum::project");
    std::vector<double> out(size());
    for (std::size_t k = 0; k < size(); ++k) {
        out[k] = inner_h(mode(k), v, mesh_step_);
    }
    return out;
}

std::vector<double> Spectrum::synthesize(std::span<const double> coefficients) const
{
    require_same_size(size(), coefficients.size(), "Spectrum::synthesize");
    std::vector<double> out(size(), 0.0);
    for (std::size_t k = 0; k < size(); ++k) {
        const double c = coefficients[k];
        const auto phi = mode(k);
        for (std::size_t i = 0; i < size(); ++i) {
            out[i] += c * phi[i];
        }
    }
    return out;
}

Spectrum eigendecompose(const DiscreteOperator& op, int max_sweeps)
{
    const std::size_t n = op.size();
    std::vector<double> d(op.diagonal().begin(), op.diagonal().end());
    std::vector<double> e(n, 0.0);
    std::copy(op.off_diagonal().begin(), op.off_diagonal().end(), e.begin());

    // vec[j * n + r]: component r of the j-th rotated basis vector.
    std::vector<double> vec(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        vec[j * n + j] = 1.0;
    }
    auto rotate = [&](std::size_t i, double s, double c) {
        double* lo = &vec[i * n];
        double* hi = &vec[(i + 1) * n];
        for (std::size_t r = 0; r < n; ++r) {
            const double f = hi[r];
            hi[r] = s * lo[r] + c * f;
            lo[r] = c * lo[r] - s * f;
        }
    };

    const double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t l = 0; l < n; ++l) {
        int sweeps = 0;
        std::size_t m = l;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd) {
                    break;
                }
            }
            if (m != l) {
                if (sweeps++ == max_sweeps) {
                    throw ConvergenceFailure("eigendecompose: QL sweeps exceeded for eigenvalue " +
                                             std::to_string(l));
                }
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0;
                double c = 1.0;
                double p = 0.0;
                bool underflow = false;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    rotate(i, s, c);
                }
                if (underflow) {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

    const double scale = 1.0 / std::sqrt(op.mesh_step());
    std::vector<double> values(n);
    std::vector<double> modes(n * n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        values[k] = d[j];
        const double* src = &vec[j * n];
        const double biggest = std::abs(*std::max_element(src, src + n, [](double a, double b) {
            return std::abs(a) < std::abs(b);
        }));
        double sign = 1.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (std::abs(src[r]) > 1e-10 * biggest) {
                sign = src[r] > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            modes[k * n + r] = sign * scale * src[r];
        }
    }
    return Spectrum(std::move(values), std::move(modes), op.mesh_step());
}

std::vector<double> fractional_apply(const Spectrum& spectrum, double exponent, std::span<const double> v)
{
    std::vector<double> c = spectrum.project(v);
    const auto lambda = spectrum.eigenvalues();
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (!(lambda[k] > 0.0)) {
            throw PreconditionViolation("fractional_apply: eigenvalues must be positive");
        }
        c[k] *= std::pow(lambda[k], exponent);
    }
    return spectrum.synthesize(c);
}

BalakrishnanResult balakrishnan_neg_power(const DiscreteOperator& op, double beta, std::span<const double> v,
                                          const BalakrishnanConfig& config)
{
    if (!(beta > 0.0 && beta < 1.0)) {
        throw PreconditionViolation("balakrishnan_neg_power: beta must lie in (0, 1)");
    }
    require_same_size(op.size(), v.size(), "balakrishnan_neg_power");
    const std::size_t n = op.size();

    BalakrishnanResult out;
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
        out.values.assign(n, 0.0);
        return out;
    }

    // Window in s = log(eta). With eta^{-beta}(A + eta)^{-1} bounded by
    // eta^{-beta}/lambda_min below and eta^{-1-beta} above, these offsets keep
    // both discarded tails under truncation_tol relative to ||A^{-beta} v||.
    const double lambda_lo = op.eigenvalue_lower_bound();
    const double lambda_hi = op.eigenvalue_upper_bound();
    const double log_tol = std::log(1.0 / config.truncation_tol);
    const double spread = std::log(lambda_hi / lambda_lo);
    out.s_min = std::log(lambda_lo) - (log_tol + std::log(1.0 / (1.0 - beta)) + beta * spread) / (1.0 - beta);
    out.s_max = std::log(lambda_hi) + (log_tol + std::log(1.0 / beta)) / beta;

    const quad::GaussLegendreRule rule = quad::gauss_legendre(config.panel_points);
    const double factor = std::sin(std::numbers::pi * beta) / std::numbers::pi;

    auto integrate = [&](std::size_t panels) {
        std::vector<double> acc(n, 0.0);
        const double width = (out.s_max - out.s_min) / static_cast<double>(panels);
        for (std::size_t p = 0; p < panels; ++p) {
            const double centre = out.s_min + (static_cast<double>(p) + 0.5) * width;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double s = centre + 0.5 * width * rule.nodes[q];
                double weight = 0.5 * width * rule.weights[q];
                std::vector<double> w;
                if (s <= 0.0) {
                    weight *= std::exp((1.0 - beta) * s);
                    w = op.solve_scaled(1.0, std::exp(s), v);
                } else {
                    // e^{(1-beta)s} (A + e^s)^{-1} = e^{-beta s} (e^{-s} A + I)^{-1}
                    weight *= std::exp(-beta * s);
                    w = op.solve_scaled(std::exp(-s), 1.0, v);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    acc[i] += weight * w[i];
                }
            }
        }
        for (double& a : acc) {
            a *= factor;
        }
        return acc;
    };

    std::size_t panels =
        static_cast<std::size_t>(std::ceil((out.s_max - out.s_min) / config.panel_width));
    std::vector<double> coarse = integrate(panels);
    for (int doubling = 0; doubling < config.max_doublings; ++doubling) {
        panels *= 2;
        std::vector<double> fine = integrate(panels);
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) {
            diff[i] = fine[i] - coarse[i];
        }
        const double h = op.mesh_step();
        out.last_change = norm_h(diff, h) / norm_h(fine, h);
        out.panels = panels;
        if (out.last_change <= config.rel_tol) {
            out.values = std::move(fine);
            return out;
        }
        coarse = std::move(fine);
    }
    throw QuadratureNotConverged("balakrishnan_neg_power: relative change " + std::to_string(out.last_change) +
                                 " after " + std::to_string(config.max_doublings) + " panel doublings");
}

bool resolvent_positivity_check(const DiscreteOperator& op, double eta, std::span<const double> a)
{
    require_same_size(op.size(), a.size(), "resolvent_positivity_check");
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
        throw PreconditionViolation("resolvent_positivity_check: eta must be finite and >= 0");
    }
    if (std::any_of(a.begin(), a.end(), [](double x) { return !(x >= 0.0); })) {
        throw PreconditionViolation("resolvent_positivity_check: a must be entrywise non-negative");
    }
    if (std::none_of(a.begin(), a.end(), [](double x) { return x > 0.0; })) {
        throw PreconditionViolation("resolvent_positivity_check: a must not vanish identically");
    }
    const std::vector<double> w = op.solve_shifted(eta, a);
    return std::all_of(w.begin(), w.end(), [](double x) { return x > 0.0; });
}

double grouped_coefficient(const Spectrum& spectrum, std::span<const double> a, std::size_t sensor, std::size_t mode)
{
    if (sensor >= spectrum.size()) {
        throw PreconditionViolation("grouped_coefficient: sensor node out of range");
    }
    if (mode < 1 || mode > spectrum.size()) {
        throw PreconditionViolation("grouped_coefficient: mode index out of range");
    }
    const auto phi = spectrum.mode(mode - 1);
    return inner_h(a, phi, spectrum.mesh_step()) * phi[sensor];
}

std::optional<std::size_t> first_identifiable_mode(std::span<const double> eigenvalues,
                                                   std::span<const double> weights, double weight_tol,
                                                   double lambda_tol)
{
    require_same_size(eigenvalues.size(), weights.size(), "first_identifiable_mode");
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (std::abs(weights[k]) > weight_tol && std::abs(eigenvalues[k] - 1.0) > lambda_tol) {
            return k + 1;
        }
    }
    return std::nullopt;
}

IdentifiabilityReport check_identifiability(const Spectrum& spectrum, std::span<const double> a, std::size_t sensor,
                                            double tol)
{
    if (sensor >= spectrum.size()) {
        throw PreconditionViolation("check_identifiability: sensor node out of range");
    }
    if (!(tol > 0.0)) {
        throw PreconditionViolation("check_identifiability: tolerance must be positive");
    }
    require_same_size(spectrum.size(), a.size(), "check_identifiability");
    IdentifiabilityReport report;
    const std::vector<double> c = spectrum.project(a);
    report.weights.resize(spectrum.size());
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        report.weights[k] = c[k] * spectrum.mode(k)[sensor];
    }
    const double scale = norm_h(a, spectrum.mesh_step());
    report.k0 = first_identifiable_mode(spectrum.eigenvalues(), report.weights, tol * scale, tol);

    report.sensor_value = a[sensor];
    const auto lambda = spectrum.eigenvalues();
    const bool some_eigenvalue_not_one =
        std::any_of(lambda.begin(), lambda.end(), [&](double l) { return std::abs(l - 1.0) > tol; });
    report.sufficient_condition = std::abs(report.sensor_value) > tol * scale && some_eigenvalue_not_one;
    report.one_signed = std::all_of(a.begin(), a.end(), [](double x) { return x >= 0.0; }) ||
                        std::all_of(a.begin(), a.end(), [](double x) { return x <= 0.0; });
    return report;
}

} // namespace fracdiff
