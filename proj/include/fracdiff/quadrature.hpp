#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace fracdiff::quad {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Newton iteration on the three-term Legendre recurrence; nodes ascending.
GaussLegendreRule gauss_legendre(std::size_t points);

/// One node of a double-exponential rule. For tanh-sinh on [0,1], `x` is the
/// abscissa and `xc` = 1 - x, both computed without cancellation. For exp-sinh
/// on [0,inf), `x` is the abscissa and `log_x` its logarithm.
struct DENode {
    double x;
    double xc;
    double log_x;
    double weight;
};

/// Node table of a double-exponential rule, organised by refinement level so
/// that level L adds only the nodes absent from levels < L.
class DETable {
public:
    enum class Kind { TanhSinh, ExpSinh };

    DETable(Kind kind, int max_level);

    int max_level() const noexcept { return static_cast<int>(levels_.size()) - 1; }
    /// Step length at `level` (level 0 has step 1).
    static double step(int level) noexcept;
    const std::vector<DENode>& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }

    static const DETable& tanh_sinh();
    static const DETable& exp_sinh();

private:
    std::vector<std::vector<DENode>> levels_;
};

struct DEResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int level = 0;
    bool converged = false;
};

/// Adaptive level refinement of a double-exponential rule. `f` receives a
/// DENode and returns the integrand already composed with the caller's
/// change of variables; the node weight is applied here.
template <class F>
DEResult de_integrate(const DETable& table, F&& f, double rel_tol, double abs_tol = 0.0, int min_level = 3)
{
    DEResult out;
    double raw = 0.0;
    double previous = 0.0;
    for (int l = 0; l <= table.max_level(); ++l) {
        for (const DENode& node : table.level(l)) {
            raw += node.weight * f(node);
        }
        const double current = raw * DETable::step(l);
        out.value = current;
        out.level = l;
        if (l > 0) {
            out.error_estimate = std::abs(current - previous);
            if (l >= min_level && out.error_estimate <= std::max(rel_tol * std::abs(current), abs_tol)) {
                out.converged = true;
                return out;
            }
        }
        previous = current;
    }
    return out;
}

} // namespace fracdiff::quad
