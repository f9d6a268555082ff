#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "gaussrot/gaussrot.hpp"

using namespace gaussrot;

namespace {

PropagatorOptions opts() {
    PropagatorOptions o;
    if (const char* w = std::getenv("GAUSSROT_FFTW_WISDOM")) o.wisdom_file = w;
    return o;
}

// Reduced crossing: q = 100 um, t = 50 ms, on a 512 x 256 box.
ScenarioParams small_scenario() { return ScenarioParams{100.0, 4.0, 0.02, 0.01, units::lithium7_mass}; }
Grid2D small_grid() { return Grid2D{-320.0, 320.0, -160.0, 160.0, 512, 256}; }
RidgeParams small_ridge(double v0 = 2.0) { return RidgeParams{v0, 10.0}; }

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("gaussrot_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Grid, CheckRejectsBadLayouts) {
    const auto p = scenario_packet(small_scenario());
    Grid2D g = small_grid();
    g.n1 = 500;
    EXPECT_THROW(check_grid(g, p, 50.0), ConfigError);
    g = small_grid();
    g.n1 = 128;  // dx = 5 um, de Broglie wavelength ~14 um
    try {
        check_grid(g, p, 50.0);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("de Broglie"), std::string::npos);
    }
    g = small_grid();
    g.x2min = -80.0;
    g.x2max = 80.0;
    g.n2 = 128;
    try {
        check_grid(g, p, 50.0);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("padding"), std::string::npos);
    }
    const auto ok = check_grid(small_grid(), p, 50.0);
    EXPECT_LE(ok.resolution_ratio, 1.0);
    EXPECT_LE(ok.padding_ratio, 1.0);
}

TEST(Grid, WavenumbersInFftOrder) {
    const Grid2D g{0.0, 8.0, 0.0, 4.0, 8, 4};
    EXPECT_EQ(g.k1(0), 0.0);
    EXPECT_NEAR(g.k1(1), 2 * std::numbers::pi / 8.0, 1e-15);
    EXPECT_NEAR(g.k1(7), -2 * std::numbers::pi / 8.0, 1e-15);
    EXPECT_NEAR(g.k1(4), -std::numbers::pi, 1e-15);
}

TEST(InitField, BaselinePacketNormalizedAndCentred) {
    const ScenarioParams s;
    const auto p = scenario_packet(s);
    const Grid2D g;
    const WaveField f = init_field(p, g, s.t());
    EXPECT_NEAR(field_norm(f), 1.0, 1e-8);
    EXPECT_NEAR(f.init_norm_correction, 1.0, 1e-6);
    std::size_t best = 0;
    for (std::size_t k = 0; k < f.psi.size(); ++k)
        if (std::norm(f.psi[k]) > std::norm(f.psi[best])) best = k;
    const double x1 = g.x1(best / g.n2), x2 = g.x2(best % g.n2);
    EXPECT_LE(std::abs(x1 - p.q[0]), g.dx1());
    EXPECT_LE(std::abs(x2 - p.q[1]), g.dx2());
}

TEST(Measure, InitialDiagonalPacketHasNoInternalMam) {
    const auto s = small_scenario();
    SplitStepPropagator prop(small_grid(), zero_potential<2>(), s.mass, 0.05, opts());
    const auto r = prop.measure(init_field(scenario_packet(s), small_grid(), s.t()));
    EXPECT_NEAR(r.mam_internal, 0.0, 1e-6);
    EXPECT_NEAR(r.norm, 1.0, 1e-8);
    EXPECT_NEAR(r.mean_position[0], -s.q, 1e-8);
    EXPECT_NEAR(r.mean_velocity[0], s.v, 1e-8);
}

TEST(Measure, CorrelatedPacketMatchesAnalyticInternalMam) {
    GaussianPacket<2> p = diagonal_packet<2>(units::lithium7_mass, {}, {}, {0.02, 0.01});
    p.omega(0, 1) = p.omega(1, 0) = 0.005;
    const Grid2D g{-160.0, 160.0, -160.0, 160.0, 256, 256};
    SplitStepPropagator prop(g, zero_potential<2>(), p.mass, 0.05, opts());
    const auto r = prop.measure(init_field(p, g));
    const double want = in_hbar(mam_internal(p))[2];
    EXPECT_NEAR(want, 0.5 * 0.005 * (1 / 0.02 - 1 / 0.01), 1e-12);
    EXPECT_NEAR(r.mam_internal, want, 1e-5);
    // internal = total - <x> x mu <v>, in hbar
    const double ext = p.mass * (r.mean_position[0] * r.mean_velocity[1] - r.mean_position[1] * r.mean_velocity[0]) /
                       units::hbar;
    EXPECT_NEAR(r.mam_internal, r.mam_total - ext, 1e-12);
}

TEST(Propagate, FreeFlightMatchesExactPacket) {
    const auto s = small_scenario();
    const auto p = scenario_packet(s);
    const Grid2D g = small_grid();
    SplitStepPropagator prop(g, zero_potential<2>(), s.mass, 0.05, opts());
    WaveField f = init_field(p, g, s.t());
    const auto series = run_series(prop, f, 1000, 50);
    const auto exact = free_propagate(p, f.time);
    EXPECT_NEAR(f.time, 50.0, 1e-12);
    const std::size_t i = static_cast<std::size_t>(std::lround((exact.q[0] - g.x1min) / g.dx1()));
    const std::size_t j = static_cast<std::size_t>(std::lround((exact.q[1] - g.x2min) / g.dx2()));
    const complex want = evaluate(exact, Vec<2>{g.x1(i), g.x2(j)});
    EXPECT_LT(std::abs(f.at(i, j) - want) / std::abs(want), 1e-6);
    for (const auto& r : series) {
        EXPECT_NEAR(r.norm, 1.0, 1e-10);
        EXPECT_NEAR(r.mam_internal, 0.0, 1e-6);
        EXPECT_NEAR(r.mean_position[0], -s.q + s.v * r.t, 1e-6);
    }
}

TEST(Propagate, SecondOrderInTimeStep) {
    const auto s = small_scenario();
    const auto p = scenario_packet(s);
    const Grid2D g = small_grid();
    const auto v = make_ridge_potential(small_ridge(8.0));
    auto final_state = [&](double dt) {
        SplitStepPropagator prop(g, v, s.mass, dt, opts());
        WaveField f = init_field(p, g, s.t());
        prop.propagate(f, static_cast<std::size_t>(std::lround(s.t() / dt)));
        return f;
    };
    const WaveField ref = final_state(0.025);
    auto err = [&](const WaveField& f) {
        double e = 0.0;
        for (std::size_t k = 0; k < f.psi.size(); ++k) e += std::norm(f.psi[k] - ref.psi[k]);
        return std::sqrt(e * g.cell());
    };
    const double e1 = err(final_state(0.2)), e2 = err(final_state(0.1));
    const double ratio = e1 / e2;
    EXPECT_GT(ratio, 3.0) << e1 << " " << e2;
    EXPECT_LT(ratio, 5.0) << e1 << " " << e2;
}

TEST(Propagate, RejectsUnresolvedKineticPhase) {
    const auto s = small_scenario();
    SplitStepPropagator prop(small_grid(), zero_potential<2>(), s.mass, 5.0, opts());
    WaveField f = init_field(scenario_packet(s), small_grid(), s.t());
    try {
        prop.propagate(f, 1);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("kinetic phase"), std::string::npos);
    }
}

TEST(Propagate, NormDriftAbortsWithDiagnostics) {
    const auto s = small_scenario();
    auto o = opts();
    o.norm_drift_per_1000 = 1e-300;
    SplitStepPropagator prop(small_grid(), make_ridge_potential(small_ridge()), s.mass, 0.05, o);
    WaveField f = init_field(scenario_packet(s), small_grid(), s.t());
    try {
        prop.propagate(f, 200);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("norm drifted"), std::string::npos);
    }
}

TEST(Propagate, UnitaryWithBoundedPotential) {
    const auto s = small_scenario();
    SplitStepPropagator prop(small_grid(), make_ridge_potential(small_ridge()), s.mass, 0.05, opts());
    WaveField f = init_field(scenario_packet(s), small_grid(), s.t());
    const auto series = run_series(prop, f, 1000, 100);
    EXPECT_NEAR(series.back().norm, series.front().norm, 1e-10);
}

TEST(Propagate, AbsorbingMaskOnlyRemovesNorm) {
    const auto s = small_scenario();
    auto o = opts();
    o.absorb_width = 40.0;
    SplitStepPropagator prop(small_grid(), zero_potential<2>(), s.mass, 0.05, o);
    WaveField f = init_field(scenario_packet(s), small_grid(), s.t());
    const double n0 = field_norm(f);
    prop.propagate(f, 1000);
    const double n1 = field_norm(f);
    EXPECT_LE(n1, n0 + 1e-12);
    EXPECT_GT(n1, 0.999);  // packet stays clear of the mask
}

TEST(Propagate, GridMismatchRejected) {
    SplitStepPropagator prop(small_grid(), zero_potential<2>(), 7.0, 0.05, opts());
    Grid2D other = small_grid();
    other.n2 = 512;
    other.x2min = -320;
    other.x2max = 320;
    WaveField f = init_field(scenario_packet(small_scenario()), other, 50.0);
    EXPECT_THROW(prop.propagate(f, 1), ConfigError);
}

TEST(Propagate, InvocationCounter) {
    const long before = grid_invocations().load();
    SplitStepPropagator prop(small_grid(), zero_potential<2>(), 7.0, 0.05, opts());
    EXPECT_EQ(grid_invocations().load(), before + 1);
}

TEST(Checkpoint, RoundTrip) {
    const auto s = small_scenario();
    WaveField f = init_field(scenario_packet(s), small_grid(), s.t());
    f.time = 12.5;
    const auto path = temp_path("ckpt.bin");
    write_checkpoint(path.string(), f);
    EXPECT_EQ(std::filesystem::file_size(path), 8u + 4 + 4 + 16 + 40 + f.psi.size() * 8);
    const WaveField g = read_checkpoint(path.string());
    EXPECT_EQ(g.grid.n1, f.grid.n1);
    EXPECT_EQ(g.grid.n2, f.grid.n2);
    EXPECT_EQ(g.grid.x1min, f.grid.x1min);
    EXPECT_EQ(g.grid.x2max, f.grid.x2max);
    EXPECT_EQ(g.time, 12.5);
    double peak = 0.0, worst = 0.0;
    for (std::size_t k = 0; k < f.psi.size(); ++k) {
        peak = std::max(peak, std::abs(f.psi[k]));
        worst = std::max(worst, std::abs(f.psi[k] - g.psi[k]));
    }
    EXPECT_LE(worst, 1e-7 * peak);

    // corrupt magic, then truncate
    {
        std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
        io.write("XXXX", 4);
    }
    EXPECT_THROW(read_checkpoint(path.string()), ConfigError);
    write_checkpoint(path.string(), f);
    std::filesystem::resize_file(path, 100);
    EXPECT_THROW(read_checkpoint(path.string()), ConfigError);
    std::filesystem::remove(path);
    EXPECT_THROW(read_checkpoint(path.string()), ConfigError);
}

// One full-resolution crossing at the default parameters (about a minute).
TEST(BaselineRidgeRun, NormEhrenfestExtremumAndEikonalAmplitude) {
    const ScenarioParams s;
    const RidgeParams r{units::ev_to_native(1e-14), 20.0};
    const auto p = scenario_packet(s);
    const auto v = make_ridge_potential(r);
    const Grid2D g;
    SplitStepPropagator prop(g, v, s.mass, 0.05, opts());
    WaveField f = init_field(p, g, s.t());
    const auto series = run_series(prop, f, 3000, 20);

    EXPECT_NEAR(series.back().norm, 1.0, 1e-9);

    // d<x>/dt against <p>/mu, central differences on the 1 ms output grid
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < series.size(); ++k) {
        const double h = series[k + 1].t - series[k - 1].t;
        const Vec<2> dx = (series[k + 1].mean_position - series[k - 1].mean_position) / h;
        worst = std::max(worst, norm(dx - series[k].mean_velocity) / norm(series[k].mean_velocity));
    }
    EXPECT_LE(worst, 1e-4);

    std::size_t ext = 0;
    for (std::size_t k = 0; k < series.size(); ++k)
        if (std::abs(series[k].mam_internal) > std::abs(series[ext].mam_internal)) ext = k;
    EXPECT_NEAR(series[ext].t, 75.0, 2.0);

    const Vec<2> qp = free_propagate(p, s.t()).q;
    const std::size_t i = static_cast<std::size_t>(std::lround((qp[0] - g.x1min) / g.dx1()));
    const std::size_t j = static_cast<std::size_t>(std::lround((qp[1] - g.x2min) / g.dx2()));
    ASSERT_NEAR(g.x1(i), qp[0], 1e-9);
    ASSERT_NEAR(g.x2(j), qp[1], 1e-9);
    const double eik = std::abs(eikonal_wavefunction(p, v, qp, s.t()));
    const double num = std::abs(f.at(i, j));
    EXPECT_LE(std::abs(eik - num) / num, 0.02) << eik << " vs " << num;
}
