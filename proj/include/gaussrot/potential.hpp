#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include "gaussrot/tensor.hpp"

namespace gaussrot {

/// Derivative blocks of the line-averaged potential U_{x,y} at a point pair.
///
/// Index conventions follow the gradient-column-vector notation:
///   a(j)        = dU/dy_j
///   b(j,k)      = d2U/dy_j dy_k
///   mixed(j,k)  = d2U/dx_k dy_j
///   c(j,k)      = d2U/dx_j dx_k
///   fourth[j][k](l,m) = d4U/dx_j dx_k dy_l dy_m
template <std::size_t N>
struct UDerivatives {
    Vec<N> x{};
    Vec<N> y{};
    double value = 0.0;
    Vec<N> a{};
    RealMat<N> b{};
    RealMat<N> mixed{};
    RealMat<N> c{};
    std::array<std::array<RealMat<N>, N>, N> fourth{};
    bool has_fourth = false;
    bool analytic = false;

    UDerivatives& scale(double s) {
        value *= s;
        a *= s;
        b *= s;
        mixed *= s;
        c *= s;
        for (auto& row : fourth)
            for (auto& m : row) m *= s;
        return *this;
    }
};

/// A static external potential V(x), in energy units u*um^2/ms^2.
///
/// line_average and blocks are optional analytic shortcuts. Either may decline
/// a particular point pair by returning nullopt, in which case the engine falls
/// back to quadrature / finite differences.
template <std::size_t N>
struct PotentialModel {
    std::string name = "potential";
    std::function<double(const Vec<N>&)> value;
    std::function<std::optional<double>(const Vec<N>&, const Vec<N>&)> line_average;
    std::function<std::optional<UDerivatives<N>>(const Vec<N>&, const Vec<N>&)> blocks;
    double length_scale = 1.0;    // um; characteristic variation scale
    double strength_scale = 0.0;  // energy; rough max |V|
    bool identically_zero = false;
};

template <std::size_t N>
PotentialModel<N> zero_potential(double length_scale = 1.0) {
    PotentialModel<N> m;
    m.name = "zero";
    m.value = [](const Vec<N>&) { return 0.0; };
    m.line_average = [](const Vec<N>&, const Vec<N>&) { return std::optional<double>(0.0); };
    m.blocks = [](const Vec<N>& x, const Vec<N>& y) {
        UDerivatives<N> d;
        d.x = x;
        d.y = y;
        d.has_fourth = true;
        d.analytic = true;
        return std::optional<UDerivatives<N>>(d);
    };
    m.length_scale = length_scale;
    m.identically_zero = true;
    return m;
}

/// V(x) = c + g^T x, with exact line averages and derivative blocks.
template <std::size_t N>
PotentialModel<N> linear_potential(double c, const Vec<N>& g, double length_scale = 1.0) {
    PotentialModel<N> m;
    m.name = "linear";
    m.value = [c, g](const Vec<N>& x) { return c + dot(g, x); };
    m.line_average = [c, g](const Vec<N>& x, const Vec<N>& y) {
        return std::optional<double>(c + 0.5 * dot(g, x + y));
    };
    m.blocks = [c, g](const Vec<N>& x, const Vec<N>& y) {
        UDerivatives<N> d;
        d.x = x;
        d.y = y;
        d.value = c + 0.5 * dot(g, x + y);
        d.a = 0.5 * g;
        d.has_fourth = true;
        d.analytic = true;
        return std::optional<UDerivatives<N>>(d);
    };
    m.length_scale = length_scale;
    m.strength_scale = std::abs(c);
    return m;
}

/// lambda * V, with analytic pieces scaled alongside.
template <std::size_t N>
PotentialModel<N> scaled(const PotentialModel<N>& base, double lambda) {
    PotentialModel<N> m = base;
    m.name = base.name + " (scaled)";
    m.value = [f = base.value, lambda](const Vec<N>& x) { return lambda * f(x); };
    if (base.line_average) {
        m.line_average = [f = base.line_average, lambda](const Vec<N>& x, const Vec<N>& y) {
            auto r = f(x, y);
            if (r) *r *= lambda;
            return r;
        };
    }
    if (base.blocks) {
        m.blocks = [f = base.blocks, lambda](const Vec<N>& x, const Vec<N>& y) {
            auto r = f(x, y);
            if (r) r->scale(lambda);
            return r;
        };
    }
    m.strength_scale = std::abs(lambda) * base.strength_scale;
    m.identically_zero = base.identically_zero || lambda == 0.0;
    return m;
}

/// Copy of the model with its analytic shortcuts removed (forces quadrature + FD).
template <std::size_t N>
PotentialModel<N> without_analytic(const PotentialModel<N>& base) {
    PotentialModel<N> m = base;
    m.line_average = nullptr;
    m.blocks = nullptr;
    return m;
}

}  // namespace gaussrot
