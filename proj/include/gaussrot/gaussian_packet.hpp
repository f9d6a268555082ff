#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>

#include "gaussrot/errors.hpp"
#include "gaussrot/tensor.hpp"
#include "gaussrot/units.hpp"

namespace gaussrot {

/// Gaussian state
///   psi(x) = (mu / pi hbar)^{N/4} (det Im Omega)^{1/4}
///            exp{ i mu/hbar [ (x-q)^T Omega (x-q) / 2 + v^T (x-q) ] + i phase }
///
/// Omega is complex symmetric with positive-definite imaginary part; its real
/// part encodes position-momentum correlation.
template <std::size_t N>
    requires SupportedDim<N>
struct GaussianPacket {
    double mass = 1.0;
    Vec<N> q{};
    Vec<N> v{};
    ComplexMat<N> omega = ComplexMat<N>::identity() * complex(0.0, 1.0);
    double phase = 0.0;

    /// Throws DomainError on a malformed state.
    void validate(double symmetry_tol = default_symmetry_tol) const {
        if (!(mass > 0.0) || !std::isfinite(mass)) throw DomainError("packet: mass must be positive");
        if (!all_finite(q) || !all_finite(v) || !all_finite(omega) || !std::isfinite(phase)) {
            throw DomainError("packet: non-finite component");
        }
        if (!is_symmetric(omega, symmetry_tol)) throw DomainError("packet: Omega is not symmetric");
        if (!is_positive_definite(symmetrize(imag_part(omega)), symmetry_tol)) {
            throw DomainError("packet: Im(Omega) is not positive definite");
        }
    }
};

/// Packet with Omega = i diag(omegas).
template <std::size_t N>
GaussianPacket<N> diagonal_packet(double mass, const Vec<N>& q, const Vec<N>& v,
                                  const std::array<double, N>& omegas, double phase = 0.0) {
    GaussianPacket<N> p;
    p.mass = mass;
    p.q = q;
    p.v = v;
    p.omega = ComplexMat<N>::zero();
    for (std::size_t i = 0; i < N; ++i) p.omega(i, i) = complex(0.0, omegas[i]);
    p.phase = phase;
    p.validate();
    return p;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::remainder(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    return a;
}

/// arg det M(s) at s = t, continued from s = 0 without branch jumps.
///
/// M(s) must be nonsingular on [0, t]; the increment of arg det over each
/// accepted sub-step is kept below pi/8 by bisection.
template <typename MatrixFn>
double continuous_arg_det(MatrixFn&& m_of_s, double t) {
    complex d0 = det(m_of_s(0.0));
    double acc = std::arg(d0);
    if (t == 0.0) return acc;
    const double h_max = t / 8.0;
    const double h_min = std::abs(t) * 1e-12;
    double s0 = 0.0;
    double h = h_max;
    while ((t > 0.0) ? (s0 < t) : (s0 > t)) {
        double s1 = s0 + h;
        if ((t > 0.0) ? (s1 > t) : (s1 < t)) s1 = t;
        const complex d1 = det(m_of_s(s1));
        const double dphi = std::arg(d1 / d0);
        if (std::abs(dphi) > std::numbers::pi / 8.0 && std::abs(h) > h_min) {
            h *= 0.5;
            continue;
        }
        acc += dphi;
        s0 = s1;
        d0 = d1;
        h = std::min(std::abs(h) * 2.0, std::abs(h_max)) * (t > 0.0 ? 1.0 : -1.0);
    }
    return acc;
}

template <std::size_t N>
double normalization_prefactor(const GaussianPacket<N>& p) {
    const double d = det(imag_part(p.omega));
    return std::pow(p.mass / (std::numbers::pi * units::hbar), static_cast<double>(N) / 4.0) *
           std::pow(d, 0.25);
}

/// Amplitude psi(x).
template <std::size_t N>
complex evaluate(const GaussianPacket<N>& p, const Vec<N>& x) {
    const Vec<N> d = x - p.q;
    const complex quad = 0.5 * bilinear(d, p.omega, d) + dot(p.v, d);
    const complex exponent = complex(0.0, p.mass / units::hbar) * quad + complex(0.0, p.phase);
    return normalization_prefactor(p) * std::exp(exponent);
}

/// Covariance matrix of |psi|^2: hbar / (2 mu) * (Im Omega)^-1.
template <std::size_t N>
RealMat<N> position_covariance(const GaussianPacket<N>& p) {
    return (units::hbar / (2.0 * p.mass)) * inverse(imag_part(p.omega));
}

/// Standard deviation of |psi|^2 along each axis.
template <std::size_t N>
Vec<N> position_widths(const GaussianPacket<N>& p) {
    const RealMat<N> cov = position_covariance(p);
    Vec<N> w;
    for (std::size_t i = 0; i < N; ++i) w[i] = std::sqrt(cov(i, i));
    return w;
}

/// Omega' with (Omega')^-1 = Omega^-1 + I t.
template <std::size_t N>
ComplexMat<N> free_omega(const ComplexMat<N>& omega, double t) {
    if (t == 0.0) return omega;
    return inverse(inverse(omega) + ComplexMat<N>::identity() * t);
}

/// Principal-value forms of the free-flight phase increment, for comparison.
struct FreePhaseForms {
    double continuous;           // kinetic + -(1/2) arg det(I + Omega s), tracked from s = 0
    double via_minus_omega_prime;  // kinetic + (1/2) Arg det(I - Omega' t)
    double via_plus_omega;         // kinetic - (1/2) Arg det(I + Omega t)
};

template <std::size_t N>
FreePhaseForms free_phase_forms(const GaussianPacket<N>& p, double t) {
    const auto id = ComplexMat<N>::identity();
    const double kinetic = p.mass * dot(p.v, p.v) * t / (2.0 * units::hbar);
    const ComplexMat<N> omega_t = free_omega(p.omega, t);
    const double tracked =
        continuous_arg_det([&](double s) { return id + p.omega * s; }, t);
    return {kinetic - 0.5 * tracked, kinetic + 0.5 * std::arg(det(id - omega_t * t)),
            kinetic - 0.5 * std::arg(det(id + p.omega * t))};
}

/// Exact free evolution for time t >= 0.
///
/// The phase uses the continuously tracked arg det(I + Omega s), so the sign
/// of the amplitude is correct even when the principal branch would wrap.
template <std::size_t N>
GaussianPacket<N> free_propagate(const GaussianPacket<N>& p, double t) {
    if (t < 0.0) throw DomainError("free_propagate: t must be non-negative");
    p.validate();
    if (t == 0.0) return p;
    GaussianPacket<N> out = p;
    out.q = p.q + p.v * t;
    out.omega = symmetrize(free_omega(p.omega, t));
    out.phase = wrap_phase(p.phase + free_phase_forms(p, t).continuous);
    if (!is_positive_definite(symmetrize(imag_part(out.omega)))) {
        throw NumericalError("free_propagate: Im(Omega') lost positive definiteness");
    }
    return out;
}

/// mu q x v, in u um^2 / ms.
template <std::size_t N>
Vec<3> mam_external(const GaussianPacket<N>& p) {
    return p.mass * cross(embed3(p.q), embed3(p.v));
}

/// (hbar / 2) axial[Re Omega, (Im Omega)^-1] for a bare shape matrix.
template <std::size_t N>
Vec<3> internal_mam(const ComplexMat<N>& omega) {
    const RealMat<N> re = real_part(omega);
    const RealMat<N> im_inv = inverse(imag_part(omega));
    return (0.5 * units::hbar) * axial(commutator(re, im_inv));
}

template <std::size_t N>
Vec<3> mam_internal(const GaussianPacket<N>& p) {
    return internal_mam(p.omega);
}

template <std::size_t N>
Vec<3> mam_total(const GaussianPacket<N>& p) {
    return mam_external(p) + mam_internal(p);
}

/// Angular momentum expressed in units of hbar.
inline Vec<3> in_hbar(const Vec<3>& l) { return l / units::hbar; }

}  // namespace gaussrot
