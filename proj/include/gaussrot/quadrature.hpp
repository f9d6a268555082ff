#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace gaussrot {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t order() const { return nodes.size(); }

    explicit GaussLegendreRule(std::size_t n) : nodes(n), weights(n) {
        if (n == 0) throw std::invalid_argument("Gauss-Legendre order must be positive");
        const std::size_t m = (n + 1) / 2;
        for (std::size_t i = 0; i < m; ++i) {
            // Chebyshev-like initial guess, then Newton on P_n.
            double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                                (static_cast<double>(n) + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p1 = 1.0, p2 = 0.0;
                for (std::size_t j = 1; j <= n; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
                }
                pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
                const double dz = p1 / pp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
    }
};

/// Shared, lazily built rule of the given order (thread-safe).
inline const GaussLegendreRule& gauss_legendre(std::size_t order) {
    static std::mutex mutex;
    static std::map<std::size_t, std::unique_ptr<GaussLegendreRule>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[order];
    if (!slot) slot = std::make_unique<GaussLegendreRule>(order);
    return *slot;
}

/// Composite Gauss-Legendre quadrature of f over [a, b] with equal panels.
///
/// f is called as f(x) for every node; the callback may abort by throwing.
template <typename F>
double integrate_gl(F&& f, double a, double b, std::size_t order, std::size_t panels = 1) {
    const auto& rule = gauss_legendre(order);
    const double width = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + width * static_cast<double>(p);
        const double half = 0.5 * width;
        const double mid = lo + half;
        double s = 0.0;
        for (std::size_t k = 0; k < rule.order(); ++k) s += rule.weights[k] * f(mid + half * rule.nodes[k]);
        total += half * s;
    }
    return total;
}

}  // namespace gaussrot
