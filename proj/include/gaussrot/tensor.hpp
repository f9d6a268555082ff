#pragma once

// Small fixed-size real/complex linear algebra for dimensions 2 and 3.
//
// Everything is a value type over std::array; determinants and inverses use
// closed forms (cofactors), which is what the shape-matrix algebra needs and
// nothing more.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <type_traits>

#include "gaussrot/errors.hpp"

namespace gaussrot {

using complex = std::complex<double>;

template <std::size_t N>
concept SupportedDim = (N == 2 || N == 3);

template <std::size_t N>
struct Vec {
    static_assert(N >= 1 && N <= 3, "vectors are 1..3 dimensional");
    std::array<double, N> c{};

    constexpr double& operator[](std::size_t i) { return c[i]; }
    constexpr double operator[](std::size_t i) const { return c[i]; }
    static constexpr std::size_t size() { return N; }

    static constexpr Vec zero() { return Vec{}; }

    constexpr Vec& operator+=(const Vec& o) {
        for (std::size_t i = 0; i < N; ++i) c[i] += o.c[i];
        return *this;
    }
    constexpr Vec& operator-=(const Vec& o) {
        for (std::size_t i = 0; i < N; ++i) c[i] -= o.c[i];
        return *this;
    }
    constexpr Vec& operator*=(double s) {
        for (auto& x : c) x *= s;
        return *this;
    }

    friend constexpr bool operator==(const Vec&, const Vec&) = default;
};

template <std::size_t N>
constexpr Vec<N> operator+(Vec<N> a, const Vec<N>& b) { return a += b; }
template <std::size_t N>
constexpr Vec<N> operator-(Vec<N> a, const Vec<N>& b) { return a -= b; }
template <std::size_t N>
constexpr Vec<N> operator-(Vec<N> a) { return a *= -1.0; }
template <std::size_t N>
constexpr Vec<N> operator*(double s, Vec<N> a) { return a *= s; }
template <std::size_t N>
constexpr Vec<N> operator*(Vec<N> a, double s) { return a *= s; }
template <std::size_t N>
constexpr Vec<N> operator/(Vec<N> a, double s) { return a *= 1.0 / s; }

template <std::size_t N>
constexpr double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t N>
double norm(const Vec<N>& a) { return std::sqrt(dot(a, a)); }

constexpr Vec<3> cross(const Vec<3>& a, const Vec<3>& b) {
    return {{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]}};
}

/// Places an in-plane vector into 3-space (third component zero).
template <std::size_t N>
constexpr Vec<3> embed3(const Vec<N>& a) {
    Vec<3> r{};
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i];
    return r;
}

template <std::size_t N>
bool all_finite(const Vec<N>& a) {
    return std::all_of(a.c.begin(), a.c.end(), [](double x) { return std::isfinite(x); });
}

template <typename T, std::size_t N>
struct Mat {
    static_assert(N >= 1 && N <= 3, "matrices are 1..3 dimensional");
    using value_type = T;
    std::array<T, N * N> e{};

    constexpr T& operator()(std::size_t i, std::size_t j) { return e[i * N + j]; }
    constexpr const T& operator()(std::size_t i, std::size_t j) const { return e[i * N + j]; }
    static constexpr std::size_t dim() { return N; }

    static constexpr Mat zero() { return Mat{}; }
    static constexpr Mat identity() {
        Mat m{};
        for (std::size_t i = 0; i < N; ++i) m(i, i) = T(1);
        return m;
    }
    static constexpr Mat diagonal(const std::array<T, N>& d) {
        Mat m{};
        for (std::size_t i = 0; i < N; ++i) m(i, i) = d[i];
        return m;
    }

    constexpr Mat& operator+=(const Mat& o) {
        for (std::size_t i = 0; i < N * N; ++i) e[i] += o.e[i];
        return *this;
    }
    constexpr Mat& operator-=(const Mat& o) {
        for (std::size_t i = 0; i < N * N; ++i) e[i] -= o.e[i];
        return *this;
    }
    template <typename S>
    constexpr Mat& operator*=(S s) {
        for (auto& x : e) x *= s;
        return *this;
    }

    friend constexpr bool operator==(const Mat&, const Mat&) = default;
};

template <std::size_t N>
using RealMat = Mat<double, N>;
template <std::size_t N>
using ComplexMat = Mat<complex, N>;

namespace detail {
template <typename A, typename B>
using product_t = decltype(std::declval<A>() * std::declval<B>());
}

template <typename A, typename B, std::size_t N>
constexpr auto operator+(const Mat<A, N>& a, const Mat<B, N>& b) {
    Mat<detail::product_t<A, B>, N> r{};
    for (std::size_t i = 0; i < N * N; ++i) r.e[i] = a.e[i] + b.e[i];
    return r;
}
template <typename A, typename B, std::size_t N>
constexpr auto operator-(const Mat<A, N>& a, const Mat<B, N>& b) {
    Mat<detail::product_t<A, B>, N> r{};
    for (std::size_t i = 0; i < N * N; ++i) r.e[i] = a.e[i] - b.e[i];
    return r;
}
template <typename T, std::size_t N>
constexpr Mat<T, N> operator-(Mat<T, N> a) { return a *= -1.0; }

template <typename A, typename B, std::size_t N>
constexpr auto operator*(const Mat<A, N>& a, const Mat<B, N>& b) {
    Mat<detail::product_t<A, B>, N> r{};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < N; ++k)
            for (std::size_t j = 0; j < N; ++j) r(i, j) += a(i, k) * b(k, j);
    return r;
}

// scalar * matrix (real or complex scalar)
template <typename T, std::size_t N>
constexpr Mat<T, N> operator*(double s, Mat<T, N> a) { return a *= s; }
template <typename T, std::size_t N>
constexpr Mat<T, N> operator*(Mat<T, N> a, double s) { return a *= s; }
template <typename T, std::size_t N>
constexpr ComplexMat<N> operator*(complex s, const Mat<T, N>& a) {
    ComplexMat<N> r{};
    for (std::size_t i = 0; i < N * N; ++i) r.e[i] = s * a.e[i];
    return r;
}
template <typename T, std::size_t N>
constexpr ComplexMat<N> operator*(const Mat<T, N>& a, complex s) { return s * a; }

template <std::size_t N>
constexpr Vec<N> operator*(const RealMat<N>& a, const Vec<N>& v) {
    Vec<N> r{};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) r[i] += a(i, j) * v[j];
    return r;
}

/// x^T A y for real vectors and a real or complex matrix.
template <typename T, std::size_t N>
constexpr T bilinear(const Vec<N>& x, const Mat<T, N>& a, const Vec<N>& y) {
    T s{};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) s += x[i] * a(i, j) * y[j];
    return s;
}

template <typename T, std::size_t N>
constexpr Mat<T, N> transpose(const Mat<T, N>& a) {
    Mat<T, N> r{};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) r(i, j) = a(j, i);
    return r;
}

template <typename T, std::size_t N>
constexpr T trace(const Mat<T, N>& a) {
    T s{};
    for (std::size_t i = 0; i < N; ++i) s += a(i, i);
    return s;
}

template <std::size_t N>
constexpr RealMat<N> real_part(const ComplexMat<N>& a) {
    RealMat<N> r{};
    for (std::size_t i = 0; i < N * N; ++i) r.e[i] = a.e[i].real();
    return r;
}
template <std::size_t N>
constexpr RealMat<N> imag_part(const ComplexMat<N>& a) {
    RealMat<N> r{};
    for (std::size_t i = 0; i < N * N; ++i) r.e[i] = a.e[i].imag();
    return r;
}
template <std::size_t N>
constexpr ComplexMat<N> to_complex(const RealMat<N>& re, const RealMat<N>& im = RealMat<N>{}) {
    ComplexMat<N> r{};
    for (std::size_t i = 0; i < N * N; ++i) r.e[i] = complex(re.e[i], im.e[i]);
    return r;
}

/// Largest entry magnitude.
template <typename T, std::size_t N>
double max_abs(const Mat<T, N>& a) {
    double m = 0.0;
    for (const auto& x : a.e) m = std::max(m, std::abs(x));
    return m;
}

template <typename T, std::size_t N>
double frobenius_norm(const Mat<T, N>& a) {
    double s = 0.0;
    for (const auto& x : a.e) s += std::norm(complex(x));
    return std::sqrt(s);
}

template <typename T, std::size_t N>
bool all_finite(const Mat<T, N>& a) {
    return std::all_of(a.e.begin(), a.e.end(), [](const T& x) {
        return std::isfinite(std::real(x)) && std::isfinite(std::imag(x));
    });
}

inline constexpr double default_symmetry_tol = 1e-10;

/// |A_ij - A_ji| <= tol * max|A| for all i, j.
template <typename T, std::size_t N>
bool is_symmetric(const Mat<T, N>& a, double tol = default_symmetry_tol) {
    const double scale = max_abs(a);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol * scale) return false;
    return true;
}

template <typename T, std::size_t N>
bool is_antisymmetric(const Mat<T, N>& a, double tol = default_symmetry_tol) {
    const double scale = max_abs(a);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i; j < N; ++j)
            if (std::abs(a(i, j) + a(j, i)) > tol * scale) return false;
    return true;
}

template <typename T, std::size_t N>
constexpr Mat<T, N> symmetrize(const Mat<T, N>& a) { return 0.5 * (a + transpose(a)); }

template <typename T, std::size_t N>
constexpr Mat<T, N> antisymmetrize(const Mat<T, N>& a) { return 0.5 * (a - transpose(a)); }

/// Commutator AB - BA.
template <typename A, typename B, std::size_t N>
constexpr auto commutator(const Mat<A, N>& a, const Mat<B, N>& b) {
    return a * b - b * a;
}

/// Axial vector m of the antisymmetric part of M, i.e. M u = m x u.
///
/// Always three components: in 2-D the only component is the out-of-plane
/// one, (0, 0, M21).
template <std::size_t N>
    requires SupportedDim<N>
constexpr Vec<3> axial(const RealMat<N>& m) {
    const RealMat<N> a = antisymmetrize(m);
    if constexpr (N == 2) {
        return {{0.0, 0.0, a(1, 0)}};
    } else {
        return {{a(2, 1), a(0, 2), a(1, 0)}};
    }
}

/// Like axial(), but rejects input that is not antisymmetric within tol.
template <std::size_t N>
    requires SupportedDim<N>
Vec<3> axial_strict(const RealMat<N>& m, double tol = default_symmetry_tol) {
    if (!is_antisymmetric(m, tol)) throw DomainError("axial: matrix is not antisymmetric");
    return axial(m);
}

template <typename T, std::size_t N>
    requires SupportedDim<N>
constexpr T det(const Mat<T, N>& a) {
    if constexpr (N == 2) {
        return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    } else {
        return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
               a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
               a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    }
}

template <typename T, std::size_t N>
    requires SupportedDim<N>
constexpr Mat<T, N> adjugate(const Mat<T, N>& a) {
    Mat<T, N> r{};
    if constexpr (N == 2) {
        r(0, 0) = a(1, 1);
        r(0, 1) = -a(0, 1);
        r(1, 0) = -a(1, 0);
        r(1, 1) = a(0, 0);
    } else {
        r(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
        r(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
        r(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
        r(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
        r(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
        r(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
        r(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
        r(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
        r(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    }
    return r;
}

inline constexpr double default_singular_floor = 1e-300;

/// Inverse via the adjugate of A / max|A|.
///
/// Throws SingularMatrixError when |det(A / max|A|)| <= floor; the error
/// carries |det A| of the unscaled matrix.
template <typename T, std::size_t N>
    requires SupportedDim<N>
Mat<T, N> inverse(const Mat<T, N>& a, double floor = default_singular_floor) {
    const double scale = max_abs(a);
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw SingularMatrixError("inverse: zero or non-finite matrix", 0.0);
    }
    const Mat<T, N> s = a * (1.0 / scale);
    const T d = det(s);
    const double dmag = std::abs(d);
    if (!(dmag > floor)) {
        std::ostringstream os;
        const double full = dmag * std::pow(scale, static_cast<double>(N));
        os << "inverse: singular matrix (|det| = " << full << ")";
        throw SingularMatrixError(os.str(), full);
    }
    Mat<T, N> r = adjugate(s);
    const T factor = T(1) / (d * scale);
    for (auto& x : r.e) x *= factor;
    return r;
}

/// Cholesky test for a real symmetric matrix; non-symmetric input is rejected.
template <std::size_t N>
    requires SupportedDim<N>
bool is_positive_definite(const RealMat<N>& s, double symmetry_tol = default_symmetry_tol) {
    if (!is_symmetric(s, symmetry_tol)) {
        throw DomainError("is_positive_definite: matrix is not symmetric");
    }
    RealMat<N> l{};
    for (std::size_t j = 0; j < N; ++j) {
        double d = s(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) return false;
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < N; ++i) {
            double v = s(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
            l(i, j) = v / l(j, j);
        }
    }
    return true;
}

}  // namespace gaussrot
