#include "fracdiff/quadrature.hpp"

#include <numbers>
#include <stdexcept>

namespace fracdiff::quad {

GaussLegendreRule gauss_legendre(std::size_t points)
{
    if (points == 0) {
        throw std::invalid_argument("gauss_legendre: need at least one point");
    }
    GaussLegendreRule rule;
    rule.nodes.resize(points);
    rule.weights.resize(points);
    const std::size_t half = (points + 1) / 2;
    const double n = static_cast<double>(points);
    for (std::size_t i = 0; i < half; ++i) {
        // Tricomi initial guess for the i-th largest root.
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= points; ++k) {
                const double kd = static_cast<double>(k);
                const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
                p0 = p1;
                p1 = p2;
            }
            if (points == 1) {
                p0 = 1.0;
                p1 = x;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[points - 1 - i] = x;
        rule.nodes[i] = -x;
        rule.weights[points - 1 - i] = w;
        rule.weights[i] = w;
    }
    return rule;
}

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
// Outside these ranges every node weight is below ~1e-40, which is
// negligible for the bounded integrands the library feeds in.
constexpr double kTanhSinhTauMax = 4.5;
constexpr double kExpSinhTauMin = -5.0;
constexpr double kExpSinhTauMax = 4.5;

DENode tanh_sinh_node(double tau)
{
    const double u = kHalfPi * std::sinh(tau);
    DENode node{};
    // x = 1/(1+e^{-2u}), 1-x = 1/(1+e^{2u}); both are formed directly.
    node.x = 1.0 / (1.0 + std::exp(-2.0 * u));
    node.xc = 1.0 / (1.0 + std::exp(2.0 * u));
    node.log_x = std::log(node.x);
    node.weight = kHalfPi * std::cosh(tau) * 2.0 * node.x * node.xc;
    return node;
}

DENode exp_sinh_node(double tau)
{
    const double u = kHalfPi * std::sinh(tau);
    DENode node{};
    node.x = std::exp(u);
    node.xc = 0.0;
    node.log_x = u;
    node.weight = node.x * kHalfPi * std::cosh(tau);
    return node;
}

bool usable(const DENode& node)
{
    return std::isfinite(node.x) && std::isfinite(node.weight) && node.weight > 0.0 && node.x > 0.0;
}

} // namespace

double DETable::step(int level) noexcept
{
    return std::ldexp(1.0, -level);
}

DETable::DETable(Kind kind, int max_level)
{
    levels_.resize(static_cast<std::size_t>(max_level) + 1);
    for (int l = 0; l <= max_level; ++l) {
        const double h = step(l);
        const double tau_lo = kind == Kind::TanhSinh ? -kTanhSinhTauMax : kExpSinhTauMin;
        const double tau_hi = kind == Kind::TanhSinh ? kTanhSinhTauMax : kExpSinhTauMax;
        const long j_lo = static_cast<long>(std::ceil(tau_lo / h));
        const long j_hi = static_cast<long>(std::floor(tau_hi / h));
        for (long j = j_lo; j <= j_hi; ++j) {
            // Level 0 holds every integer multiple; finer levels only odd ones.
            if (l > 0 && (j % 2 == 0)) {
                continue;
            }
            const double tau = static_cast<double>(j) * h;
            const DENode node = kind == Kind::TanhSinh ? tanh_sinh_node(tau) : exp_sinh_node(tau);
            if (usable(node)) {
                levels_[static_cast<std::size_t>(l)].push_back(node);
            }
        }
    }
}

const DETable& DETable::tanh_sinh()
{
    static const DETable table(Kind::TanhSinh, 8);
    return table;
}

const DETable& DETable::exp_sinh()
{
    static const DETable table(Kind::ExpSinh, 8);
    return table;
}

} // namespace fracdiff::quad
