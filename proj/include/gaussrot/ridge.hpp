#pragma once

// Tilted ridge barrier V(xi) = xi_2 f(xi_1) with a Gaussian profile f, its
// closed-form line average and derivative blocks, and the closed-form
// internal angular momentum shift for the symmetric crossing scenario.

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gaussrot/errors.hpp"
#include "gaussrot/gaussian_packet.hpp"
#include "gaussrot/potential.hpp"
#include "gaussrot/tensor.hpp"
#include "gaussrot/units.hpp"

namespace gaussrot {

struct RidgeParams {
    double v0 = 0.0;     // integral of f, native energy units
    double ell = 20.0;   // um
    // Closed forms need both segment endpoints outside the barrier, on
    // opposite sides, at least this many ell from xi_1 = 0.
    double closed_form_margin = 5.0;

    void validate() const {
        if (!(ell > 0.0) || !std::isfinite(ell)) throw DomainError("ridge: ell must be positive");
        if (!std::isfinite(v0)) throw DomainError("ridge: V0 must be finite");
    }
};

/// Packet launched from (-q, 0) with velocity (v, 0); t = 2q/v puts the free
/// centre at (q, 0).
struct ScenarioParams {
    double q = 300.0;      // um
    double v = 4.0;        // um/ms
    double omega1 = 0.01;  // 1/ms
    double omega2 = 0.005;
    double mass = units::lithium7_mass;

    double t() const { return 2.0 * q / v; }

    void validate() const {
        if (!(q > 0.0) || !(v > 0.0) || !(omega1 > 0.0) || !(omega2 > 0.0) || !(mass > 0.0)) {
            throw DomainError("scenario: q, v, omega1, omega2 and mass must all be positive");
        }
    }
};

struct RegimeRatios {
    double small_packet = 0.0;  // hbar / (mu omega_min q^2), should be << 1
    double fast_packet = 0.0;   // 2 omega_max q / v, should be < 1
    double narrow_ridge = 0.0;  // ell / q, should be << 1
    static constexpr double warn_threshold = 0.2;

    std::vector<std::string> warnings() const {
        std::vector<std::string> out;
        auto check = [&](const char* name, double r) {
            if (r > warn_threshold) {
                std::ostringstream os;
                os << name << " ratio " << r << " exceeds " << warn_threshold;
                out.push_back(os.str());
            }
        };
        check("packet size (hbar / mu omega_min q^2)", small_packet);
        check("packet speed (2 omega_max q / v)", fast_packet);
        check("ridge width (ell / q)", narrow_ridge);
        return out;
    }
};

inline RegimeRatios regime_ratios(const ScenarioParams& s, const RidgeParams& r) {
    s.validate();
    r.validate();
    RegimeRatios out;
    out.small_packet = units::hbar / (s.mass * std::min(s.omega1, s.omega2) * s.q * s.q);
    out.fast_packet = 2.0 * std::max(s.omega1, s.omega2) * s.q / s.v;
    out.narrow_ridge = r.ell / s.q;
    return out;
}

inline double ridge_profile(const RidgeParams& r, double s) {
    const double z = s / r.ell;
    return r.v0 / (std::sqrt(std::numbers::pi) * r.ell) * std::exp(-z * z);
}

inline double ridge_value(const RidgeParams& r, const Vec<2>& xi) { return xi[1] * ridge_profile(r, xi[0]); }

/// V0 (x1 y2 - y1 x2) / (x1 - y1)^2; valid when the segment crosses the whole barrier.
inline double ridge_line_average(const RidgeParams& r, const Vec<2>& x, const Vec<2>& y) {
    const double d = x[0] - y[0];
    if (d == 0.0 || std::abs(d) < 1e-12 * r.ell) {
        throw DomainError("ridge_line_average: coincident x1 coordinates; use quadrature");
    }
    return r.v0 * (x[0] * y[1] - y[0] * x[1]) / (d * d);
}

inline bool ridge_closed_form_valid(const RidgeParams& r, const Vec<2>& x, const Vec<2>& y) {
    const double m = r.closed_form_margin * r.ell;
    return (x[0] >= m && y[0] <= -m) || (x[0] <= -m && y[0] >= m);
}

namespace detail {

inline double rising(double n, int k) {
    double p = 1.0;
    for (int i = 0; i < k; ++i) p *= n + i;
    return p;
}

// d^i/dx1^i d^j/dy1^j of D^-n, D = x1 - y1.
inline double d_inv_pow(double d, int n, int i, int j) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    return sign * rising(n, i + j) * std::pow(d, -(n + i + j));
}

// P = x1 / D^2 and Q = y1 / D^2, so U = V0 (y2 P - x2 Q).
inline double d_p(double x1, double d, int i, int j) {
    double r = x1 * d_inv_pow(d, 2, i, j);
    if (i > 0) r += i * d_inv_pow(d, 2, i - 1, j);
    return r;
}

inline double d_q(double y1, double d, int i, int j) {
    double r = y1 * d_inv_pow(d, 2, i, j);
    if (j > 0) r += j * d_inv_pow(d, 2, i, j - 1);
    return r;
}

}  // namespace detail

/// All derivative blocks of the closed-form line average at (x, y).
inline UDerivatives<2> ridge_blocks(const RidgeParams& r, const Vec<2>& x, const Vec<2>& y) {
    using detail::d_p;
    using detail::d_q;
    const double x1 = x[0], x2 = x[1], y1 = y[0], y2 = y[1];
    const double d = x1 - y1;
    const double v0 = r.v0;
    // mixed P/Q combination appearing in every block with one x1/y1 derivative pattern
    auto pq = [&](int i, int j) { return v0 * (y2 * d_p(x1, d, i, j) - x2 * d_q(y1, d, i, j)); };

    UDerivatives<2> u;
    u.x = x;
    u.y = y;
    u.value = ridge_line_average(r, x, y);
    u.a[0] = pq(0, 1);
    u.a[1] = v0 * d_p(x1, d, 0, 0);

    u.b(0, 0) = pq(0, 2);
    u.b(0, 1) = u.b(1, 0) = v0 * d_p(x1, d, 0, 1);

    u.c(0, 0) = pq(2, 0);
    u.c(0, 1) = u.c(1, 0) = -v0 * d_q(y1, d, 1, 0);

    // mixed(j, k) = d2U / dx_k dy_j
    u.mixed(0, 0) = pq(1, 1);
    u.mixed(0, 1) = -v0 * d_q(y1, d, 0, 1);
    u.mixed(1, 0) = v0 * d_p(x1, d, 1, 0);

    // fourth[j][k](l, m) = d4U / dx_j dx_k dy_l dy_m; U is bilinear in (x2, y2)
    // with no x2 y2 term, so any index pattern with two "2"s vanishes.
    u.fourth[0][0](0, 0) = pq(2, 2);
    u.fourth[0][0](0, 1) = u.fourth[0][0](1, 0) = v0 * d_p(x1, d, 2, 1);
    u.fourth[0][1](0, 0) = u.fourth[1][0](0, 0) = -v0 * d_q(y1, d, 1, 2);
    u.has_fourth = true;
    u.analytic = true;
    return u;
}

/// The ridge as a PotentialModel; closed forms are offered only where valid.
inline PotentialModel<2> make_ridge_potential(const RidgeParams& r) {
    r.validate();
    PotentialModel<2> m;
    m.name = "tilted ridge";
    m.value = [r](const Vec<2>& xi) { return ridge_value(r, xi); };
    m.line_average = [r](const Vec<2>& x, const Vec<2>& y) -> std::optional<double> {
        if (!ridge_closed_form_valid(r, x, y)) return std::nullopt;
        return ridge_line_average(r, x, y);
    };
    m.blocks = [r](const Vec<2>& x, const Vec<2>& y) -> std::optional<UDerivatives<2>> {
        if (!ridge_closed_form_valid(r, x, y)) return std::nullopt;
        return ridge_blocks(r, x, y);
    };
    m.length_scale = r.ell;
    m.strength_scale = std::abs(r.v0) / (std::sqrt(std::numbers::pi) * r.ell);
    m.identically_zero = r.v0 == 0.0;
    return m;
}

inline GaussianPacket<2> scenario_packet(const ScenarioParams& s) {
    s.validate();
    return diagonal_packet<2>(s.mass, Vec<2>{-s.q, 0.0}, Vec<2>{s.v, 0.0}, {s.omega1, s.omega2});
}

/// Out-of-plane internal MAM shift in units of hbar: q V0 (omega1 - omega2) / (mu v^3).
inline double closed_form_delta_mam(const ScenarioParams& s, const RidgeParams& r) {
    s.validate();
    r.validate();
    return s.q * r.v0 * (s.omega1 - s.omega2) / (s.mass * s.v * s.v * s.v);
}

/// Closed-form Delta Omega for the symmetric crossing.
inline ComplexMat<2> closed_form_delta_omega(const ScenarioParams& s, const RidgeParams& r) {
    const double tau = s.t();
    const complex num(tau * s.omega1 * s.omega2, -(s.omega1 + s.omega2));
    const complex den = complex(1.0, tau * s.omega1) * complex(1.0, tau * s.omega2);
    const complex off = -(r.v0 / (s.mass * s.v * s.v)) * num / den;
    ComplexMat<2> m = ComplexMat<2>::zero();
    m(0, 1) = m(1, 0) = off;
    return m;
}

}  // namespace gaussrot
