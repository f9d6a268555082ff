#pragma once

// 2-D split-step Fourier solver for i hbar dpsi/dt = (-hbar^2/2mu Laplacian + V) psi
// on a periodic box, plus observable extraction and binary checkpoints.

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gaussrot/errors.hpp"
#include "gaussrot/gaussian_packet.hpp"
#include "gaussrot/potential.hpp"
#include "gaussrot/tensor.hpp"
#include "gaussrot/units.hpp"

namespace gaussrot {

/// Number of propagator instances ever built in this process. The analytic
/// prediction path must leave it untouched.
inline std::atomic<long>& grid_invocations() {
    static std::atomic<long> n{0};
    return n;
}

struct Grid2D {
    double x1min = -600.0, x1max = 600.0;
    double x2min = -300.0, x2max = 300.0;
    std::size_t n1 = 1024, n2 = 512;

    double dx1() const { return (x1max - x1min) / static_cast<double>(n1); }
    double dx2() const { return (x2max - x2min) / static_cast<double>(n2); }
    double cell() const { return dx1() * dx2(); }
    double x1(std::size_t i) const { return x1min + dx1() * static_cast<double>(i); }
    double x2(std::size_t j) const { return x2min + dx2() * static_cast<double>(j); }
    std::size_t size() const { return n1 * n2; }

    // Angular wavenumbers in FFT order.
    double k1(std::size_t i) const { return wavenumber(i, n1, x1max - x1min); }
    double k2(std::size_t j) const { return wavenumber(j, n2, x2max - x2min); }

    static double wavenumber(std::size_t i, std::size_t n, double length) {
        const double m = i < n / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(n);
        return 2.0 * std::numbers::pi * m / length;
    }
};

struct GridCheck {
    double resolution_ratio = 0.0;  // dx_max / (lambda_dB / 8), must be <= 1
    double padding_ratio = 0.0;     // 6 widths / smallest edge distance, must be <= 1
};

/// Checks the grid against a packet that will fly freely for t_final.
inline GridCheck check_grid(const Grid2D& g, const GaussianPacket<2>& p, double t_final) {
    auto pow2 = [](std::size_t n) { return n >= 2 && std::has_single_bit(n); };
    if (!pow2(g.n1) || !pow2(g.n2)) throw ConfigError("grid: point counts must be powers of two");
    if (!(g.x1max > g.x1min) || !(g.x2max > g.x2min)) throw ConfigError("grid: empty extent");

    GridCheck c;
    const double speed = norm(p.v);
    if (speed > 0.0) {
        const double lambda = 2.0 * std::numbers::pi * units::hbar / (p.mass * speed);
        c.resolution_ratio = std::max(g.dx1(), g.dx2()) / (lambda / 8.0);
    }
    double worst = 0.0;
    for (const auto& s : {p, free_propagate(p, t_final)}) {
        const Vec<2> w = position_widths(s);
        const double d1 = std::min(s.q[0] - g.x1min, g.x1max - s.q[0]);
        const double d2 = std::min(s.q[1] - g.x2min, g.x2max - s.q[1]);
        worst = std::max({worst, d1 > 0 ? 6.0 * w[0] / d1 : INFINITY, d2 > 0 ? 6.0 * w[1] / d2 : INFINITY});
    }
    c.padding_ratio = worst;
    if (c.resolution_ratio > 1.0) {
        std::ostringstream os;
        os << "grid: spacing does not resolve the de Broglie wavelength (dx / (lambda/8) = " << c.resolution_ratio
           << ")";
        throw ConfigError(os.str());
    }
    if (c.padding_ratio > 1.0) {
        std::ostringstream os;
        os << "grid: box holds fewer than 6 packet widths of padding (6 widths / edge distance = " << c.padding_ratio
           << ")";
        throw ConfigError(os.str());
    }
    return c;
}

struct WaveField {
    Grid2D grid;
    std::vector<complex> psi;  // row-major, index i * n2 + j with i along x1
    double time = 0.0;
    double init_norm_correction = 1.0;  // factor applied at initialisation

    complex& at(std::size_t i, std::size_t j) { return psi[i * grid.n2 + j]; }
    complex at(std::size_t i, std::size_t j) const { return psi[i * grid.n2 + j]; }
};

inline double field_norm(const WaveField& f) {
    double s = 0.0;
    for (const auto& z : f.psi) s += std::norm(z);
    return s * f.grid.cell();
}

/// Samples the packet on the grid and renormalises once.
inline WaveField init_field(const GaussianPacket<2>& p, const Grid2D& g, double t_final = 0.0) {
    check_grid(g, p, t_final);
    WaveField f;
    f.grid = g;
    f.psi.resize(g.size());
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j) f.at(i, j) = evaluate(p, Vec<2>{g.x1(i), g.x2(j)});
    const double n = field_norm(f);
    if (!(n > 0.0)) throw ConfigError("grid: packet does not overlap the grid");
    f.init_norm_correction = 1.0 / std::sqrt(n);
    for (auto& z : f.psi) z *= f.init_norm_correction;
    return f;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Product without the C99 Annex G NaN recovery that std::complex uses.
inline void mul_into(complex& a, const complex& b) {
    const double re = a.real() * b.real() - a.imag() * b.imag();
    const double im = a.real() * b.imag() + a.imag() * b.real();
    a = complex(re, im);
}

class FftBuffer {
public:
    explicit FftBuffer(std::size_t n) : n_(n), data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
        if (!data_) throw std::bad_alloc();
    }
    ~FftBuffer() { fftw_free(data_); }
    FftBuffer(const FftBuffer&) = delete;
    FftBuffer& operator=(const FftBuffer&) = delete;

    complex* data() { return reinterpret_cast<complex*>(data_); }
    fftw_complex* raw() { return data_; }
    std::size_t size() const { return n_; }

private:
    std::size_t n_;
    fftw_complex* data_;
};

class FftPlan {
public:
    // Caller holds fftw_planner_mutex().
    FftPlan(const Grid2D& g, FftBuffer& buf, int sign, unsigned flags) {
        plan_ = fftw_plan_dft_2d(static_cast<int>(g.n1), static_cast<int>(g.n2), buf.raw(), buf.raw(), sign, flags);
        if (!plan_) throw NumericalError("FFTW failed to create a plan");
    }
    ~FftPlan() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    void execute() const { fftw_execute(plan_); }

private:
    fftw_plan plan_ = nullptr;
};

}  // namespace detail

struct PropagatorOptions {
    bool measure_plans = true;          // FFTW_MEASURE instead of FFTW_ESTIMATE
    double norm_drift_per_1000 = 1e-8;  // abort threshold
    double kinetic_phase_limit = std::numbers::pi / 4.0;
    double populated_threshold = 1e-12;  // relative |psi_k|^2 defining the occupied band
    double absorb_width = 0.0;           // um; cosine mask at the box edges, 0 = off
    // FFTW wisdom file shared between runs. Measured plans depend on timing, so
    // reusing stored wisdom is what makes repeated runs bit-identical.
    std::string wisdom_file;
};

struct ObservableRecord {
    double t = 0.0;
    double norm = 0.0;
    Vec<2> mean_position{};
    Vec<2> mean_velocity{};
    double mam_total = 0.0;     // in hbar
    double mam_internal = 0.0;  // in hbar, about <x>
};

using ObservableSeries = std::vector<ObservableRecord>;

/// Strang split-step propagator bound to one grid, potential and time step.
class SplitStepPropagator {
public:
    SplitStepPropagator(const Grid2D& g, const PotentialModel<2>& v, double mass, double dt,
                        PropagatorOptions opts = {})
        : grid_(g), mass_(mass), dt_(dt), opts_(opts), work_(g.size()) {
        if (!(dt > 0.0)) throw ConfigError("propagator: dt must be positive");
        if (!(mass > 0.0)) throw ConfigError("propagator: mass must be positive");
        ++grid_invocations();
        const unsigned flags = opts.measure_plans ? FFTW_MEASURE : FFTW_ESTIMATE;
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            if (!opts.wisdom_file.empty()) fftw_import_wisdom_from_filename(opts.wisdom_file.c_str());
            forward_ = std::make_unique<detail::FftPlan>(g, work_, FFTW_FORWARD, flags);
            backward_ = std::make_unique<detail::FftPlan>(g, work_, FFTW_BACKWARD, flags);
            if (!opts.wisdom_file.empty()) fftw_export_wisdom_to_filename(opts.wisdom_file.c_str());
        }

        const std::size_t n = g.size();
        half_v_.resize(n);
        full_v_.resize(n);
        potential_zero_ = v.identically_zero;
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 0; j < g.n2; ++j) {
                const double val = v.identically_zero ? 0.0 : v.value(Vec<2>{g.x1(i), g.x2(j)});
                if (!std::isfinite(val)) throw DomainError("propagator: non-finite potential on the grid");
                const double ph = -val * dt / (2.0 * units::hbar);
                half_v_[i * g.n2 + j] = std::polar(1.0, ph);
                full_v_[i * g.n2 + j] = std::polar(1.0, 2.0 * ph);
            }
        kinetic_.resize(n);
        const double scale = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 0; j < g.n2; ++j) {
                const double k1 = g.k1(i), k2 = g.k2(j);
                kinetic_[i * g.n2 + j] = std::polar(scale, -units::hbar * (k1 * k1 + k2 * k2) * dt / (2.0 * mass));
            }
        if (opts.absorb_width > 0.0) build_mask();
    }

    const Grid2D& grid() const { return grid_; }
    double dt() const { return dt_; }
    double mass() const { return mass_; }

    /// Largest kinetic phase per step over momentum modes actually populated by f.
    double populated_kinetic_phase(const WaveField& f) {
        std::copy(f.psi.begin(), f.psi.end(), work_.data());
        forward_->execute();
        const complex* w = work_.data();
        double peak = 0.0;
        for (std::size_t k = 0; k < grid_.size(); ++k) peak = std::max(peak, std::norm(w[k]));
        double worst = 0.0;
        const double cut = opts_.populated_threshold * peak;
        for (std::size_t i = 0; i < grid_.n1; ++i)
            for (std::size_t j = 0; j < grid_.n2; ++j) {
                if (std::norm(w[i * grid_.n2 + j]) <= cut) continue;
                const double k1 = grid_.k1(i), k2 = grid_.k2(j);
                worst = std::max(worst, units::hbar * (k1 * k1 + k2 * k2) * dt_ / (2.0 * mass_));
            }
        return worst;
    }

    /// Advances f by `steps` Strang steps; interior half-steps of V are merged.
    void propagate(WaveField& f, std::size_t steps) {
        if (f.grid.n1 != grid_.n1 || f.grid.n2 != grid_.n2) throw ConfigError("propagate: grid mismatch");
        if (steps == 0) return;
        const double phase = populated_kinetic_phase(f);
        if (phase > opts_.kinetic_phase_limit) {
            std::ostringstream os;
            os << "propagate: kinetic phase per step on the populated band is " << phase << " rad (limit "
               << opts_.kinetic_phase_limit << "); reduce dt";
            throw ConfigError(os.str());
        }
        const double norm0 = field_norm(f);
        const std::size_t n = grid_.size();
        complex* w = work_.data();
        std::copy(f.psi.begin(), f.psi.end(), w);
        if (!potential_zero_)
            for (std::size_t k = 0; k < n; ++k) detail::mul_into(w[k], half_v_[k]);
        for (std::size_t s = 0; s < steps; ++s) {
            forward_->execute();
            for (std::size_t k = 0; k < n; ++k) detail::mul_into(w[k], kinetic_[k]);
            backward_->execute();
            if (!mask_.empty())
                for (std::size_t k = 0; k < n; ++k) w[k] *= mask_[k];
            if (potential_zero_) {
                if (s + 1 == steps) break;
                continue;
            }
            const auto& pv = (s + 1 == steps) ? half_v_ : full_v_;
            for (std::size_t k = 0; k < n; ++k) detail::mul_into(w[k], pv[k]);
        }
        std::copy(w, w + n, f.psi.begin());
        f.time += dt_ * static_cast<double>(steps);

        if (mask_.empty()) {
            const double drift = std::abs(field_norm(f) - norm0);
            const double allowed = opts_.norm_drift_per_1000 * std::max(1.0, static_cast<double>(steps) / 1000.0);
            if (drift > allowed) {
                std::ostringstream os;
                os << "propagate: norm drifted by " << drift << " over " << steps << " steps (allowed " << allowed
                   << ") at t = " << f.time << " ms";
                throw NumericalError(os.str());
            }
        }
    }

    /// Norm, mean position, mean velocity and angular momenta of f.
    ObservableRecord measure(const WaveField& f) {
        const Grid2D& g = grid_;
        const std::size_t n = g.size();
        ObservableRecord r;
        r.t = f.time;

        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 0; j < g.n2; ++j) {
                const double rho = std::norm(f.psi[i * g.n2 + j]);
                s0 += rho;
                s1 += rho * g.x1(i);
                s2 += rho * g.x2(j);
            }
        r.norm = s0 * g.cell();
        const double c1 = s1 / s0, c2 = s2 / s0;
        r.mean_position = Vec<2>{c1, c2};

        // spectral gradient of psi
        std::copy(f.psi.begin(), f.psi.end(), work_.data());
        forward_->execute();
        std::vector<complex> spec(work_.data(), work_.data() + n);
        grad1_.resize(n);
        grad2_.resize(n);
        const double scale = 1.0 / static_cast<double>(n);
        for (int axis = 0; axis < 2; ++axis) {
            complex* w = work_.data();
            for (std::size_t i = 0; i < g.n1; ++i)
                for (std::size_t j = 0; j < g.n2; ++j) {
                    double k = axis == 0 ? g.k1(i) : g.k2(j);
                    if ((axis == 0 && i == g.n1 / 2) || (axis == 1 && j == g.n2 / 2)) k = 0.0;
                    w[i * g.n2 + j] = spec[i * g.n2 + j] * complex(0.0, k * scale);
                }
            backward_->execute();
            std::copy(w, w + n, (axis == 0 ? grad1_ : grad2_).begin());
        }

        // <p_j> = hbar Im sum psi* d_j psi, and the same with lever arms for L_3
        double p1 = 0.0, p2 = 0.0, lt = 0.0, li = 0.0;
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 0; j < g.n2; ++j) {
                const std::size_t k = i * g.n2 + j;
                const complex cz = std::conj(f.psi[k]);
                const double d1 = (cz * grad1_[k]).imag();
                const double d2 = (cz * grad2_[k]).imag();
                const double x1 = g.x1(i), x2 = g.x2(j);
                p1 += d1;
                p2 += d2;
                lt += x1 * d2 - x2 * d1;
                li += (x1 - c1) * d2 - (x2 - c2) * d1;
            }
        r.mean_velocity = Vec<2>{units::hbar * p1 / (s0 * mass_), units::hbar * p2 / (s0 * mass_)};
        r.mam_total = lt / s0;
        r.mam_internal = li / s0;
        return r;
    }

private:
    void build_mask() {
        const Grid2D& g = grid_;
        mask_.assign(g.size(), 1.0);
        const double w = opts_.absorb_width;
        auto edge = [w](double d) {
            if (d >= w) return 1.0;
            const double c = std::cos(0.5 * std::numbers::pi * (1.0 - std::max(d, 0.0) / w));
            return std::pow(c, 0.125);
        };
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 0; j < g.n2; ++j) {
                const double d1 = std::min(g.x1(i) - g.x1min, g.x1max - g.x1(i));
                const double d2 = std::min(g.x2(j) - g.x2min, g.x2max - g.x2(j));
                mask_[i * g.n2 + j] = edge(d1) * edge(d2);
            }
    }

    Grid2D grid_;
    double mass_;
    double dt_;
    PropagatorOptions opts_;
    detail::FftBuffer work_;
    std::unique_ptr<detail::FftPlan> forward_, backward_;
    std::vector<complex> half_v_, full_v_, kinetic_;
    std::vector<double> mask_;
    std::vector<complex> grad1_, grad2_;
    bool potential_zero_ = false;
};

/// Runs `steps` steps, recording observables at t = 0 and every `stride` steps.
inline ObservableSeries run_series(SplitStepPropagator& prop, WaveField& f, std::size_t steps, std::size_t stride) {
    if (stride == 0) throw ConfigError("run_series: output stride must be positive");
    ObservableSeries out;
    out.push_back(prop.measure(f));
    std::size_t done = 0;
    while (done < steps) {
        const std::size_t chunk = std::min(stride, steps - done);
        prop.propagate(f, chunk);
        done += chunk;
        out.push_back(prop.measure(f));
    }
    return out;
}

// Checkpoint layout (little-endian):
//   char[8]  magic "GRCKPT01"
//   u32      version (1)
//   u32      bytes per element (8: two float32)
//   u64      n1, n2
//   f64      x1min, x1max, x2min, x2max, time
//   n1*n2 elements, row-major, (re, im) pairs
inline constexpr char checkpoint_magic[8] = {'G', 'R', 'C', 'K', 'P', 'T', '0', '1'};

namespace detail {
template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("checkpoint: truncated header");
    return v;
}
}  // namespace detail

inline void write_checkpoint(const std::string& path, const WaveField& f) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("checkpoint: cannot open " + tmp);
        os.write(checkpoint_magic, sizeof(checkpoint_magic));
        detail::put<std::uint32_t>(os, 1);
        detail::put<std::uint32_t>(os, 8);
        detail::put<std::uint64_t>(os, f.grid.n1);
        detail::put<std::uint64_t>(os, f.grid.n2);
        for (double d : {f.grid.x1min, f.grid.x1max, f.grid.x2min, f.grid.x2max, f.time}) detail::put(os, d);
        std::vector<float> buf(2 * f.psi.size());
        for (std::size_t k = 0; k < f.psi.size(); ++k) {
            buf[2 * k] = static_cast<float>(f.psi[k].real());
            buf[2 * k + 1] = static_cast<float>(f.psi[k].imag());
        }
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!os) throw ConfigError("checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw ConfigError("checkpoint: cannot rename to " + path);
}

inline WaveField read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, checkpoint_magic, sizeof(magic)) != 0) throw ConfigError("checkpoint: bad magic");
    if (detail::get<std::uint32_t>(is) != 1) throw ConfigError("checkpoint: unsupported version");
    if (detail::get<std::uint32_t>(is) != 8) throw ConfigError("checkpoint: unsupported element size");
    WaveField f;
    f.grid.n1 = detail::get<std::uint64_t>(is);
    f.grid.n2 = detail::get<std::uint64_t>(is);
    f.grid.x1min = detail::get<double>(is);
    f.grid.x1max = detail::get<double>(is);
    f.grid.x2min = detail::get<double>(is);
    f.grid.x2max = detail::get<double>(is);
    f.time = detail::get<double>(is);
    std::vector<float> buf(2 * f.grid.size());
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw ConfigError("checkpoint: truncated data");
    f.psi.resize(f.grid.size());
    for (std::size_t k = 0; k < f.psi.size(); ++k) f.psi[k] = complex(buf[2 * k], buf[2 * k + 1]);
    return f;
}

}  // namespace gaussrot
