#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace fracdiff {

using CoefficientFn = std::function<double(double)>;

/// A u = -(a(x) u')' - c(x) u on (0, L) with homogeneous Dirichlet data,
/// sampled on `mesh_points` interior nodes x_i = (i + 1) h, h = L / (n + 1).
struct OperatorSpec {
    CoefficientFn diffusivity = [](double) { return 1.0; };
    CoefficientFn potential = [](double) { return 0.0; };
    double length = 1.0;
    std::size_t mesh_points = 63;
    /// Uniform ellipticity constant mu: diffusivity must stay >= mu > 0.
    double ellipticity_bound = 1e-8;

    double mesh_step() const { return length / static_cast<double>(mesh_points + 1); }
    double node(std::size_t i) const { return static_cast<double>(i + 1) * mesh_step(); }
};

/// Discrete L2 inner product with weight h.
double inner_h(std::span<const double> u, std::span<const double> v, double h);
double norm_h(std::span<const double> u, double h);

/// Symmetric tridiagonal matrix of the discretised operator.
class DiscreteOperator {
public:
    DiscreteOperator(std::vector<double> diagonal, std::vector<double> off_diagonal, double mesh_step);

    std::size_t size() const noexcept { return diagonal_.size(); }
    double mesh_step() const noexcept { return mesh_step_; }
    double node(std::size_t i) const noexcept { return static_cast<double>(i + 1) * mesh_step_; }
    std::span<const double> diagonal() const noexcept { return diagonal_; }
    /// off_diagonal()[i] couples rows i and i + 1.
    std::span<const double> off_diagonal() const noexcept { return off_diagonal_; }

    std::vector<double> apply(std::span<const double> v) const;
    /// Solves (A + shift I) w = rhs with the Thomas algorithm.
    std::vector<double> solve_shifted(double shift, std::span<const double> rhs) const;
    /// Solves (scale A + shift I) w = rhs.
    std::vector<double> solve_scaled(double scale, double shift, std::span<const double> rhs) const;

    /// Non-positive off-diagonal and positive diagonal.
    bool has_m_matrix_sign_pattern() const;
    /// Gershgorin bound on the largest eigenvalue.
    double eigenvalue_upper_bound() const;
    /// 1 / max_i (A^{-1} 1)_i, a lower bound on the smallest eigenvalue
    /// whenever A is a non-singular M-matrix.
    double eigenvalue_lower_bound() const;

private:
    std::vector<double> diagonal_;
    std::vector<double> off_diagonal_;
    double mesh_step_;
};

/// Conservative second-order finite differences with midpoint diffusivity.
/// Throws EllipticityViolated / SignViolated when the sampled coefficients
/// leave their admissible ranges.
DiscreteOperator discretize(const OperatorSpec& spec);

/// Eigenpairs of a DiscreteOperator, eigenvalues strictly ascending and
/// eigenvectors orthonormal in the h-weighted inner product with their first
/// non-negligible component positive.
class Spectrum {
public:
    Spectrum(std::vector<double> eigenvalues, std::vector<double> modes, double mesh_step);

    std::size_t size() const noexcept { return eigenvalues_.size(); }
    double mesh_step() const noexcept { return mesh_step_; }
    std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }
    /// Mode k, 0-based (mode(0) is phi_1).
    std::span<const double> mode(std::size_t k) const;

    /// (v, phi_k)_h for every k.
    std::vector<double> project(std::span<const double> v) const;
    /// sum_k c_k phi_k.
    std::vector<double> synthesize(std::span<const double> coefficients) const;

private:
    std::vector<double> eigenvalues_;
    std::vector<double> modes_;
    double mesh_step_;
};

/// Implicit-shift QL on the tridiagonal matrix. Throws ConvergenceFailure
/// when an eigenvalue needs more than `max_sweeps` QL sweeps.
Spectrum eigendecompose(const DiscreteOperator& op, int max_sweeps = 60);

/// sum_k lambda_k^exponent (v, phi_k)_h phi_k.
std::vector<double> fractional_apply(const Spectrum& spectrum, double exponent, std::span<const double> v);

struct BalakrishnanConfig {
    std::size_t panel_points = 20;
    /// Width in s = log(eta) of the starting panels; 20-point panels of
    /// width 0.5 give 40 nodes per unit of s.
    double panel_width = 0.5;
    /// Relative change between successive panel doublings that is accepted.
    double rel_tol = 1e-10;
    /// Bound on the discarded tails relative to the result.
    double truncation_tol = 1e-13;
    int max_doublings = 4;
};

struct BalakrishnanResult {
    std::vector<double> values;
    double s_min = 0.0;
    double s_max = 0.0;
    std::size_t panels = 0;
    double last_change = 0.0;
};

/// A^{-beta} v = sin(pi beta)/pi int_0^inf eta^{-beta} (A + eta)^{-1} v d eta
/// by composite Gauss-Legendre in s = log(eta). Only resolvent solves with
/// the tridiagonal matrix are used; the spectrum is never consulted.
BalakrishnanResult balakrishnan_neg_power(const DiscreteOperator& op, double beta, std::span<const double> v,
                                          const BalakrishnanConfig& config = {});

/// Solves (A + eta I) w = a and reports whether every entry of w is strictly
/// positive. Requires a >= 0 entrywise, a != 0 and eta >= 0.
bool resolvent_positivity_check(const DiscreteOperator& op, double eta, std::span<const double> a);

/// a_k = (a, phi_k)_h phi_k(x0); `sensor` is a 0-based node index and `mode`
/// is 1-based.
double grouped_coefficient(const Spectrum& spectrum, std::span<const double> a, std::size_t sensor, std::size_t mode);

struct IdentifiabilityReport {
    /// Smallest 1-based mode with a non-negligible weight and lambda != 1.
    std::optional<std::size_t> k0;
    /// a(x0) != 0 and some eigenvalue differs from 1.
    bool sufficient_condition = false;
    /// a >= 0 or a <= 0 everywhere (the sign hypothesis on the initial datum).
    bool one_signed = false;
    double sensor_value = 0.0;
    std::vector<double> weights;
};

/// Smallest 1-based k with |weights[k-1]| > weight_tol and |lambda_k - 1| > lambda_tol.
std::optional<std::size_t> first_identifiable_mode(std::span<const double> eigenvalues,
                                                   std::span<const double> weights, double weight_tol,
                                                   double lambda_tol);

/// Condition on (a, x0) for recovering beta. `tol` is relative to ||a||_h for
/// the coefficients and absolute for |lambda - 1|.
IdentifiabilityReport check_identifiability(const Spectrum& spectrum, std::span<const double> a, std::size_t sensor,
                                            double tol = 1e-8);

} // namespace fracdiff
