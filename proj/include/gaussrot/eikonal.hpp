#pragma once

// Weak-potential (eikonal) machinery: the straight-path line average U_{x,y},
// its derivative blocks, the eikonal amplitude, and the first-order shift of
// the shape matrix and internal angular momentum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <string>

#include "gaussrot/errors.hpp"
#include "gaussrot/gaussian_packet.hpp"
#include "gaussrot/potential.hpp"
#include "gaussrot/quadrature.hpp"
#include "gaussrot/tensor.hpp"
#include "gaussrot/units.hpp"

namespace gaussrot {

struct EikonalOptions {
    std::size_t quad_order = 64;
    // Panels per segment: ceil(|x - y| / (panel_length_factor * length_scale)).
    double panel_length_factor = 1.0;
    double fd_step_fraction = 0.01;   // h = fraction * length_scale
    double fourth_step_factor = 5.0;  // step for the nested fourth derivatives, in units of h
    double richardson_tol = 1e-3;
    bool use_analytic_line_average = true;
    bool use_analytic_blocks = true;
    double weak_warn = 0.1;
    double weak_error = 1.0;
    std::function<void(const std::string&)> warn;  // optional sink for soft warnings
};

struct LineAverage {
    double value = 0.0;
    double error_estimate = 0.0;  // |U(order) - U(2 order)|, zero when analytic
    double max_abs_v = 0.0;       // over the sampled nodes
};

namespace detail {

template <std::size_t N>
bool lex_less(const Vec<N>& a, const Vec<N>& b) {
    return std::lexicographical_compare(a.c.begin(), a.c.end(), b.c.begin(), b.c.end());
}

template <std::size_t N>
std::size_t panel_count(const PotentialModel<N>& v, const Vec<N>& x, const Vec<N>& y,
                        const EikonalOptions& opts) {
    const double len = norm(x - y);
    const double panel = opts.panel_length_factor * v.length_scale;
    if (!(panel > 0.0)) return 1;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / panel)));
}

// Quadrature over alpha in [0, 1] of V(alpha x + (1 - alpha) y). The pair is
// put in canonical order first so U_{x,y} and U_{y,x} are bitwise identical.
template <std::size_t N>
double segment_quadrature(const PotentialModel<N>& v, Vec<N> x, Vec<N> y, std::size_t order,
                          std::size_t panels, double* max_abs = nullptr) {
    if (lex_less(y, x)) std::swap(x, y);
    double vmax = 0.0;
    const double result = integrate_gl(
        [&](double alpha) {
            const Vec<N> p = alpha * x + (1.0 - alpha) * y;
            const double val = v.value(p);
            if (!std::isfinite(val)) {
                std::ostringstream os;
                os << "line average: non-finite potential sample at alpha = " << alpha;
                throw DomainError(os.str());
            }
            vmax = std::max(vmax, std::abs(val));
            return val;
        },
        0.0, 1.0, order, panels);
    if (max_abs) *max_abs = vmax;
    return result;
}

}  // namespace detail

/// U_{x,y} = int_0^1 V(alpha x + (1 - alpha) y) d alpha, with an order-doubling
/// error estimate.
template <std::size_t N>
LineAverage line_average_estimate(const PotentialModel<N>& v, const Vec<N>& x, const Vec<N>& y,
                                  const EikonalOptions& opts = {}) {
    if (!all_finite(x) || !all_finite(y)) throw DomainError("line average: non-finite endpoint");
    LineAverage out;
    const std::size_t panels = detail::panel_count(v, x, y, opts);
    out.value = detail::segment_quadrature(v, x, y, opts.quad_order, panels, &out.max_abs_v);
    const double refined = detail::segment_quadrature(v, x, y, 2 * opts.quad_order, panels);
    out.error_estimate = std::abs(refined - out.value);
    return out;
}

template <std::size_t N>
double line_average_U(const PotentialModel<N>& v, const Vec<N>& x, const Vec<N>& y,
                      const EikonalOptions& opts = {}) {
    if (!all_finite(x) || !all_finite(y)) throw DomainError("line average: non-finite endpoint");
    if (opts.use_analytic_line_average && v.line_average) {
        if (auto r = v.line_average(x, y)) return *r;
    }
    return detail::segment_quadrature(v, x, y, opts.quad_order, detail::panel_count(v, x, y, opts));
}

/// max |V| sampled along the segment from y to x.
template <std::size_t N>
double segment_max_abs_v(const PotentialModel<N>& v, const Vec<N>& x, const Vec<N>& y,
                         const EikonalOptions& opts = {}) {
    if (v.identically_zero) return 0.0;
    double m = 0.0;
    detail::segment_quadrature(v, x, y, opts.quad_order, detail::panel_count(v, x, y, opts), &m);
    return m;
}

enum class BlockSet {
    y_only,  // value, a, b: what the eikonal amplitude needs
    full,    // everything, including the fourth-derivative tensor
};

namespace detail {

// Central finite differences of U over z = (x, y) in R^{2N}.
template <std::size_t N>
class UStencil {
public:
    UStencil(const PotentialModel<N>& v, const Vec<N>& x, const Vec<N>& y, const EikonalOptions& opts)
        : v_(v), opts_(opts) {
        for (std::size_t i = 0; i < N; ++i) {
            z_[i] = x[i];
            z_[N + i] = y[i];
        }
    }

    double u(const std::array<double, 2 * N>& z) const {
        Vec<N> x, y;
        for (std::size_t i = 0; i < N; ++i) {
            x[i] = z[i];
            y[i] = z[N + i];
        }
        return line_average_U(v_, x, y, opts_);
    }

    double value() const { return u(z_); }

    double first(std::size_t i, double h) const {
        auto p = z_, m = z_;
        p[i] += h;
        m[i] -= h;
        return (u(p) - u(m)) / (2.0 * h);
    }

    double second(std::size_t i, std::size_t k, double h) const { return second_at(z_, i, k, h); }

    // d4 U / dz_i dz_k dz_l dz_m by nesting two second-difference stencils.
    double fourth(std::size_t i, std::size_t k, std::size_t l, std::size_t m, double h) const {
        return apply_second(z_, i, k, h, [&](const std::array<double, 2 * N>& z) {
            return second_at(z, l, m, h);
        });
    }

private:
    template <typename G>
    static double apply_second(const std::array<double, 2 * N>& z, std::size_t i, std::size_t k, double h,
                               G&& g) {
        if (i == k) {
            auto p = z, m = z;
            p[i] += h;
            m[i] -= h;
            return (g(p) - 2.0 * g(z) + g(m)) / (h * h);
        }
        auto pp = z, pm = z, mp = z, mm = z;
        pp[i] += h;
        pp[k] += h;
        pm[i] += h;
        pm[k] -= h;
        mp[i] -= h;
        mp[k] += h;
        mm[i] -= h;
        mm[k] -= h;
        return (g(pp) - g(pm) - g(mp) + g(mm)) / (4.0 * h * h);
    }

    double second_at(const std::array<double, 2 * N>& z, std::size_t i, std::size_t k, double h) const {
        return apply_second(z, i, k, h, [this](const std::array<double, 2 * N>& w) { return u(w); });
    }

    const PotentialModel<N>& v_;
    const EikonalOptions& opts_;
    std::array<double, 2 * N> z_{};
};

template <std::size_t N>
struct SecondBlocks {
    RealMat<N> b, mixed, c;
};

template <std::size_t N>
SecondBlocks<N> fd_second_blocks(const UStencil<N>& s, double h, bool y_only) {
    SecondBlocks<N> r;
    for (std::size_t j = 0; j < N; ++j) {
        for (std::size_t k = j; k < N; ++k) {
            r.b(j, k) = r.b(k, j) = s.second(N + j, N + k, h);
            if (!y_only) r.c(j, k) = r.c(k, j) = s.second(j, k, h);
        }
        if (!y_only)
            for (std::size_t k = 0; k < N; ++k) r.mixed(j, k) = s.second(k, N + j, h);
    }
    return r;
}

template <std::size_t N>
void fd_fourth(const UStencil<N>& s, double h4, UDerivatives<N>& d) {
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t k = j; k < N; ++k)
            for (std::size_t l = 0; l < N; ++l)
                for (std::size_t m = l; m < N; ++m) {
                    const double val = s.fourth(j, k, N + l, N + m, h4);
                    d.fourth[j][k](l, m) = d.fourth[j][k](m, l) = val;
                    d.fourth[k][j](l, m) = d.fourth[k][j](m, l) = val;
                }
    d.has_fourth = true;
}

}  // namespace detail

/// Derivative blocks of U at (x, y) = (q', q) (or (field point, q)).
///
/// Analytic blocks from the model are used when available and enabled;
/// otherwise central finite differences on line_average_U with step
/// h = fd_step_fraction * length_scale, cross-checked against step 2h.
template <std::size_t N>
UDerivatives<N> u_derivatives(const PotentialModel<N>& v, const Vec<N>& x, const Vec<N>& y,
                              const EikonalOptions& opts = {}, BlockSet which = BlockSet::full) {
    if (norm(x - y) == 0.0) throw DomainError("u_derivatives: degenerate segment (x == y)");
    const double h = opts.fd_step_fraction * v.length_scale;
    if (opts.use_analytic_blocks && v.blocks) {
        if (auto r = v.blocks(x, y)) {
            if (which == BlockSet::full && !r->has_fourth) {
                detail::UStencil<N> s(v, x, y, opts);
                detail::fd_fourth(s, opts.fourth_step_factor * h, *r);
            }
            return *r;
        }
    }
    if (!(h > 0.0)) throw DomainError("u_derivatives: length scale must be positive");

    detail::UStencil<N> s(v, x, y, opts);
    UDerivatives<N> d;
    d.x = x;
    d.y = y;
    d.value = s.value();
    for (std::size_t j = 0; j < N; ++j) d.a[j] = s.first(N + j, h);
    const bool y_only = which == BlockSet::y_only;
    const auto fine = detail::fd_second_blocks(s, h, y_only);
    const auto coarse = detail::fd_second_blocks(s, 2.0 * h, y_only);
    d.b = fine.b;
    d.mixed = fine.mixed;
    d.c = fine.c;

    const double scale = std::max({max_abs(fine.b), max_abs(fine.mixed), max_abs(fine.c)});
    const double diff = std::max({max_abs(fine.b - coarse.b), max_abs(fine.mixed - coarse.mixed),
                                  max_abs(fine.c - coarse.c)});
    if (diff > opts.richardson_tol * scale && diff > 0.0) {
        std::ostringstream os;
        os << "u_derivatives: finite-difference blocks at h and 2h disagree (relative " << diff / scale
           << " > " << opts.richardson_tol << "); step collides with quadrature noise";
        throw NumericalError(os.str());
    }
    if (which == BlockSet::full) detail::fd_fourth(s, opts.fourth_step_factor * h, d);
    return d;
}

/// Quantities of the eikonal amplitude at one field point x.
template <std::size_t N>
struct HattedQuantities {
    Vec<N> v_hat{};
    Vec<N> q_hat{};
    ComplexMat<N> omega_hat{};
    double phi_hat = 0.0;  // includes the initial packet phase, unwrapped
    double u = 0.0;        // U_{x,q}
    double weakness_ratio = 0.0;  // max|V| on the segment / (mu |v|^2 / 2)
};

namespace detail {

template <std::size_t N>
double check_weakness(const GaussianPacket<N>& p, const PotentialModel<N>& v, const Vec<N>& x,
                      const EikonalOptions& opts) {
    const double vmax = segment_max_abs_v(v, x, p.q, opts);
    if (vmax == 0.0) return 0.0;
    const double e0 = 0.5 * p.mass * dot(p.v, p.v);
    const double ratio = e0 > 0.0 ? vmax / e0 : INFINITY;
    if (ratio > opts.weak_error) {
        std::ostringstream os;
        os << "potential too strong for the eikonal approximation: max|V|/E0 = " << ratio;
        throw WeaknessError(os.str(), ratio);
    }
    if (ratio > opts.weak_warn && opts.warn) {
        std::ostringstream os;
        os << "weak-potential ratio max|V|/E0 = " << ratio << " exceeds " << opts.weak_warn;
        opts.warn(os.str());
    }
    return ratio;
}

}  // namespace detail

/// Weakness ratio over the region the packet sweeps while flying freely for t:
/// max |V| along the centre path and along paths shifted by +-`widths`
/// standard deviations on each axis, divided by mu |v|^2 / 2. Applies the same
/// warn / error thresholds as hatted_quantities.
template <std::size_t N>
double swept_weakness_ratio(const GaussianPacket<N>& p, const PotentialModel<N>& v, double t,
                            const EikonalOptions& opts = {}, double widths = 3.0) {
    p.validate();
    if (v.identically_zero) return 0.0;
    const GaussianPacket<N> end = free_propagate(p, t);
    const Vec<N> w0 = position_widths(p), w1 = position_widths(end);
    double vmax = segment_max_abs_v(v, end.q, p.q, opts);
    for (std::size_t a = 0; a < N; ++a) {
        for (double sign : {-1.0, 1.0}) {
            Vec<N> d{};
            d[a] = sign * widths * std::max(w0[a], w1[a]);
            vmax = std::max(vmax, segment_max_abs_v(v, end.q + d, p.q + d, opts));
        }
    }
    const double e0 = 0.5 * p.mass * dot(p.v, p.v);
    const double ratio = vmax == 0.0 ? 0.0 : (e0 > 0.0 ? vmax / e0 : INFINITY);
    if (ratio > opts.weak_error) {
        std::ostringstream os;
        os << "potential too strong for the eikonal approximation: max|V|/E0 = " << ratio;
        throw WeaknessError(os.str(), ratio);
    }
    if (ratio > opts.weak_warn && opts.warn) {
        std::ostringstream os;
        os << "weak-potential ratio max|V|/E0 = " << ratio << " exceeds " << opts.weak_warn;
        opts.warn(os.str());
    }
    return ratio;
}

template <std::size_t N>
HattedQuantities<N> hatted_quantities(const GaussianPacket<N>& p, const PotentialModel<N>& v,
                                      const Vec<N>& x, double t, const EikonalOptions& opts = {}) {
    p.validate();
    HattedQuantities<N> h;
    h.weakness_ratio = detail::check_weakness(p, v, x, opts);

    UDerivatives<N> d;
    if (!v.identically_zero) {
        if (norm(x - p.q) == 0.0) {
            // degenerate segment: U_{q,q} = V(q) and derivatives by perturbing y only
            // TODO: analytic handling of x == q; currently shifts x by one FD step.
            Vec<N> xs = x;
            xs[0] += opts.fd_step_fraction * v.length_scale;
            d = u_derivatives(v, xs, p.q, opts, BlockSet::y_only);
        } else {
            d = u_derivatives(v, x, p.q, opts, BlockSet::y_only);
        }
    }
    const auto id = ComplexMat<N>::identity();
    const double mu = p.mass;
    h.u = d.value;
    h.v_hat = p.v - (t / mu) * d.a;
    h.q_hat = p.q + t * h.v_hat;
    const ComplexMat<N> omega_tilde = p.omega - to_complex(d.b) * (t / mu);
    try {
        h.omega_hat = t == 0.0 ? omega_tilde : symmetrize(inverse(inverse(omega_tilde) + id * t));
    } catch (const SingularMatrixError& e) {
        std::ostringstream os;
        os << "hatted_quantities: singular shape matrix at t = " << t << " ms (|det| = " << e.det_magnitude()
           << ")";
        throw SingularMatrixError(os.str(), e.det_magnitude());
    }
    const RealMat<N> b = d.b;
    const double tracked = continuous_arg_det(
        [&](double s) { return id + (p.omega - to_complex(b) * (s / mu)) * s; }, t);
    h.phi_hat = p.phase + (0.5 * mu * dot(h.v_hat, h.v_hat) - h.u) * t / units::hbar - 0.5 * tracked;
    return h;
}

/// Psi(x, t) ~ exp(i phi_hat) psi_{q_hat, v_hat, Omega_hat}(x); hatted
/// quantities are re-evaluated for every x.
template <std::size_t N>
complex eikonal_wavefunction(const GaussianPacket<N>& p, const PotentialModel<N>& v, const Vec<N>& x,
                             double t, const EikonalOptions& opts = {}) {
    const auto h = hatted_quantities(p, v, x, t, opts);
    GaussianPacket<N> g;
    g.mass = p.mass;
    g.q = h.q_hat;
    g.v = h.v_hat;
    g.omega = h.omega_hat;
    g.phase = 0.0;
    return evaluate(g, x) * std::exp(complex(0.0, h.phi_hat));
}

/// J = (I + Omega t)^-1, cross-checked against I - Omega' t.
template <std::size_t N>
ComplexMat<N> j_matrix(const GaussianPacket<N>& p, double t) {
    const auto id = ComplexMat<N>::identity();
    const ComplexMat<N> j1 = inverse(id + p.omega * t);
    const ComplexMat<N> j2 = id - free_omega(p.omega, t) * t;
    const double mismatch = max_abs(j1 - j2);
    if (mismatch > 1e-10 * std::max(1.0, max_abs(j1))) {
        std::ostringstream os;
        os << "j_matrix: resolvent forms disagree by " << mismatch;
        throw NumericalError(os.str());
    }
    return j1;
}

/// First-order shape correction from precomputed derivative blocks at (q', q).
template <std::size_t N>
ComplexMat<N> delta_omega(const GaussianPacket<N>& p, const UDerivatives<N>& d, double t) {
    if (!d.has_fourth) throw DomainError("delta_omega: fourth-derivative data missing for the trace term");
    const ComplexMat<N> j = j_matrix(p, t);
    const double mu = p.mass;

    // d2/dq'_j dq'_k tr(J B) = sum_lm J_lm d4U/dx_j dx_k dy_m dy_l
    ComplexMat<N> trace_term{};
    for (std::size_t a = 0; a < N; ++a)
        for (std::size_t b = 0; b < N; ++b) trace_term(a, b) = trace(j * d.fourth[a][b]);

    const ComplexMat<N> jm = j * d.mixed;
    const ComplexMat<N> bracket = j * d.b * j + jm + transpose(jm) + to_complex(d.c) +
                                  trace_term * complex(0.0, units::hbar * t / (2.0 * mu));
    const ComplexMat<N> r = bracket * (-t / mu);
    if (!is_symmetric(r, 1e-9)) throw NumericalError("delta_omega: result is not symmetric");
    return symmetrize(r);
}

template <std::size_t N>
ComplexMat<N> delta_omega(const GaussianPacket<N>& p, const PotentialModel<N>& v, double t,
                          const EikonalOptions& opts = {}) {
    p.validate();
    if (v.identically_zero || t == 0.0) return ComplexMat<N>::zero();
    const Vec<N> q_prime = p.q + t * p.v;
    return delta_omega(p, u_derivatives(v, q_prime, p.q, opts, BlockSet::full), t);
}

/// Omega_eff = Omega' + Delta Omega.
template <std::size_t N>
ComplexMat<N> effective_omega(const GaussianPacket<N>& p, const PotentialModel<N>& v, double t,
                              const EikonalOptions& opts = {}) {
    return free_omega(p.omega, t) + delta_omega(p, v, t, opts);
}

/// Leading-order internal MAM change for a given shape correction.
template <std::size_t N>
Vec<3> delta_mam(const GaussianPacket<N>& p, const ComplexMat<N>& d_omega, double t) {
    const ComplexMat<N> omega_t = free_omega(p.omega, t);
    const RealMat<N> inv_im = inverse(imag_part(omega_t));
    const RealMat<N> term = commutator(real_part(d_omega), inv_im) +
                            commutator(inv_im * imag_part(d_omega) * inv_im, real_part(omega_t));
    return (0.5 * units::hbar) * axial(term);
}

template <std::size_t N>
Vec<3> delta_mam(const GaussianPacket<N>& p, const PotentialModel<N>& v, double t,
                 const EikonalOptions& opts = {}) {
    return delta_mam(p, delta_omega(p, v, t, opts), t);
}

/// L_i(Omega' + Delta Omega) - L_i(Omega'), without linearisation in Delta Omega.
template <std::size_t N>
Vec<3> nonlinear_mam_shift(const GaussianPacket<N>& p, const PotentialModel<N>& v, double t,
                           const EikonalOptions& opts = {}) {
    const ComplexMat<N> omega_t = free_omega(p.omega, t);
    return internal_mam(omega_t + delta_omega(p, v, t, opts)) - internal_mam(omega_t);
}

}  // namespace gaussrot
