#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "gaussrot/experiment/config.hpp"
#include "gaussrot/experiment/runner.hpp"

using namespace gaussrot;
namespace ex = gaussrot::experiment;
namespace fs = std::filesystem;

namespace {

// Reduced crossing (q = 100 um, 50 ms, 512 x 256) that runs in a few seconds.
const char* small_toml = R"(
mode = "both"

[units]
length = "um"
velocity = "um/ms"
frequency = "1/ms"
energy = "native"
time = "ms"

[packet]
q = 100.0
v = 4.0
omega1 = 0.02
omega2 = 0.01
mass = 7.016003

[ridge]
V0 = 2.0
ell = 10.0

[grid]
n1 = 512
n2 = 256
x1 = [-320.0, 320.0]
x2 = [-160.0, 160.0]

[timing]
total = 50.0
dt = 0.05
stride = 20

[analysis]
plateau_fraction = 0.1
)";

ex::ScenarioConfig small_config() { return ex::parse_config(small_toml, "small"); }

ex::RunOptions run_options() {
    ex::RunOptions o;
    if (const char* w = std::getenv("GAUSSROT_FFTW_WISDOM")) o.wisdom_file = w;
    return o;
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("gaussrot_exp_" + std::to_string(::getpid()) + "_" +
                                             std::to_string(counter_++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
    static inline int counter_ = 0;
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    os << text;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    if (pos == std::string::npos) throw std::logic_error("replace: '" + from + "' not found");
    return s.replace(pos, from.size(), to);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GAUSSROT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---- configuration --------------------------------------------------------

TEST(Config, ShippedDefaultMatchesBuiltIn) {
    const auto c = ex::load_config(GAUSSROT_SOURCE_DIR "/configs/default.toml");
    EXPECT_EQ(c, ex::default_config());
    const auto s = c.scenario();
    EXPECT_DOUBLE_EQ(s.omega1, 0.01);
    EXPECT_DOUBLE_EQ(s.omega2, 0.005);
    EXPECT_DOUBLE_EQ(s.v, 4.0);
    EXPECT_NEAR(c.ridge().v0, 0.96485, 1e-5);
    EXPECT_EQ(c.steps(), 3000u);
    EXPECT_EQ(c.mode, ex::Mode::both);
}

TEST(Config, SwappedConfigOnlySwapsFrequencies) {
    auto a = ex::load_config(GAUSSROT_SOURCE_DIR "/configs/default.toml");
    const auto b = ex::load_config(GAUSSROT_SOURCE_DIR "/configs/swapped.toml");
    std::swap(a.omega1, a.omega2);
    EXPECT_EQ(a, b);
}

TEST(Config, RoundTripIsLossless) {
    for (const auto& c : {ex::default_config(), small_config()}) {
        const auto back = ex::parse_config(ex::to_toml_string(c), "round trip");
        EXPECT_EQ(back, c);
    }
    auto c = small_config();
    c.mode = ex::Mode::predict;
    c.total.reset();
    c.analytic_blocks = false;
    c.v0 = -0.123456789012345678;
    EXPECT_EQ(ex::parse_config(ex::to_toml_string(c)), c);
}

TEST(Config, UnitConversions) {
    auto c = small_config();
    c.units.length = "mm";
    c.q = 0.1;
    c.ell = 0.01;
    c.x1min = -0.32;
    c.x1max = 0.32;
    c.x2min = -0.16;
    c.x2max = 0.16;
    c.units.velocity = "m/s";
    c.v = 0.004;
    c.units.frequency = "1/s";
    c.omega1 = 20.0;
    c.omega2 = 10.0;
    c.units.time = "s";
    c.total = 0.05;
    c.dt = 5e-5;
    c.units.energy = "eV";
    c.v0 = units::native_to_ev(2.0);
    const auto ref = small_config();
    EXPECT_NEAR(c.scenario().q, ref.scenario().q, 1e-12);
    EXPECT_NEAR(c.scenario().v, ref.scenario().v, 1e-12);
    EXPECT_NEAR(c.scenario().omega1, ref.scenario().omega1, 1e-15);
    EXPECT_NEAR(c.ridge().ell, ref.ridge().ell, 1e-12);
    EXPECT_NEAR(c.ridge().v0, ref.ridge().v0, 1e-12);
    EXPECT_NEAR(c.grid().x1max, 320.0, 1e-9);
    EXPECT_EQ(c.steps(), ref.steps());
}

TEST(Config, ErrorsAreStructured) {
    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            ex::parse_config(text, "test.toml");
            ADD_FAILURE() << "expected ConfigError for " << needle;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_error(replace(small_toml, "ell = 10.0", "ell = 10.0\nwidth = 3"), "width");
    expect_error(std::string(small_toml) + "\n[extra]\na = 1\n", "extra");
    expect_error(replace(small_toml, "length = \"um\"", "length = \"furlong\""), "furlong");
    expect_error(replace(small_toml, "q = 100.0", "q = \"far\""), "q");
    expect_error(replace(small_toml, "mode = \"both\"", "mode = \"dance\""), "dance");
    expect_error(replace(small_toml, "total = 50.0", "total = 50.01"), "whole number");
    expect_error(replace(small_toml, "dt = 0.05", "dt = -1"), "dt");
    expect_error("this is [ not toml", "test.toml");
    EXPECT_THROW(ex::load_config("/nonexistent/gaussrot.toml"), ConfigError);
}

TEST(Config, TotalDefaultsToCrossingTime) {
    auto c = small_config();
    c.total.reset();
    EXPECT_DOUBLE_EQ(c.total_time(), 50.0);
    EXPECT_EQ(c.steps(), 1000u);
}

// ---- CSV and reports ------------------------------------------------------

TEST(SeriesCsv, FormatAndParse) {
    ObservableSeries s(2);
    s[0].t = 0.0;
    s[0].norm = 1.0;
    s[1].t = 1.0;
    s[1].norm = 0.999999999999;
    s[1].mean_position = Vec<2>{-296.0, -1.234567890123e-5};
    s[1].mean_velocity = Vec<2>{4.0, -3e-7};
    s[1].mam_total = 1.5e-3;
    s[1].mam_internal = -2.25e-4;
    const std::string text = ex::format_series_csv(s);
    EXPECT_EQ(text.substr(0, text.find('\n')), "t_ms,norm,x1_um,x2_um,v1,v2,mam_total_hbar,mam_internal_hbar");
    EXPECT_NE(text.find("-1.23456789e-05"), std::string::npos);  // 9 significant digits
    const auto back = ex::parse_series_csv(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_NEAR(back[1].mam_internal, -2.25e-4, 1e-15);
    EXPECT_NEAR(back[1].mean_position[1], -1.23456789e-5, 1e-17);
    EXPECT_EQ(ex::format_series_csv(back), text);
}

TEST(SeriesCsv, MismatchedColumnIsNamed) {
    const std::string bad = "t_s,norm,x1_um,x2_um,v1,v2,mam_total_hbar,mam_internal_hbar\n0,1,0,0,0,0,0,0\n";
    try {
        ex::parse_series_csv(bad, "run.csv");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("t_s"), std::string::npos) << e.what();
    }
    const std::string missing = "t_ms,norm,x1_um,x2_um,v1,v2,mam_total_hbar\n0,1,0,0,0,0,0\n";
    try {
        ex::parse_series_csv(missing, "run.csv");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("mam_internal_hbar"), std::string::npos) << e.what();
    }
}

TEST(Analysis, PlateauAndRelativeError) {
    ObservableSeries s(20);
    for (std::size_t i = 0; i < s.size(); ++i) s[i].mam_internal = static_cast<double>(i);
    EXPECT_DOUBLE_EQ(ex::plateau(s, 0.1), 18.5);  // last 2 samples
    EXPECT_DOUBLE_EQ(ex::plateau(s, 1.0), 9.5);
    EXPECT_EQ(ex::internal_extremum(s).mam_internal, 19.0);
    EXPECT_NEAR(ex::relative_error(1.1, 1.0), 0.1, 1e-15);
    EXPECT_NEAR(ex::relative_error(3e-7, 0.0), 0.3, 1e-15);  // floor of 1e-6 hbar
    EXPECT_THROW(ex::plateau(ObservableSeries{}, 0.1), ConfigError);
}

// ---- predict ----------------------------------------------------------------

TEST(Predict, DefaultConfigBothRoutes) {
    const long before = grid_invocations().load();
    const auto p = ex::predict(ex::default_config(), true);
    EXPECT_EQ(grid_invocations().load(), before);
    EXPECT_FALSE(p.grid_invoked);
    ASSERT_TRUE(p.closed_form_hbar.has_value());
    EXPECT_NEAR(*p.closed_form_hbar, 3.223e-3, 5e-7);
    EXPECT_LE(p.route_difference(), 1e-10);
    EXPECT_NEAR(p.regime.fast_packet, 1.5, 1e-12);
    EXPECT_FALSE(p.warnings.empty());
    EXPECT_LT(p.weakness_ratio, 0.1);
}

TEST(Predict, EqualFrequenciesGiveZero) {
    auto c = ex::default_config();
    c.omega2 = c.omega1;
    const auto p = ex::predict(c, true);
    EXPECT_EQ(*p.closed_form_hbar, 0.0);
    EXPECT_LE(std::abs(p.generic_hbar), 1e-15);
}

TEST(Predict, FiniteDifferenceBlocks) {
    const auto p = ex::predict(ex::default_config(), false);
    EXPECT_FALSE(p.analytic_blocks);
    EXPECT_LE(p.route_difference(), 1e-4);
    EXPECT_GT(p.route_difference(), 0.0);
}

TEST(Predict, HardWeaknessViolation) {
    auto c = ex::default_config();
    c.v0 = 1e-11;  // far beyond the weak regime
    EXPECT_THROW(ex::predict(c, true), WeaknessError);
}

TEST(Predict, JsonRoundTripAndUnitCheck) {
    const auto p = ex::predict(ex::default_config(), true);
    const auto j = ex::to_json(p);
    EXPECT_EQ(j["units"]["angular_momentum"], "hbar");
    EXPECT_FALSE(j["grid_invoked"].get<bool>());
    const auto back = ex::prediction_from_json(j);
    EXPECT_EQ(back.generic_hbar, p.generic_hbar);
    EXPECT_EQ(*back.closed_form_hbar, *p.closed_form_hbar);
    auto bad = j;
    bad["units"]["angular_momentum"] = "J s";
    try {
        ex::prediction_from_json(bad, "pred.json");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("angular_momentum"), std::string::npos);
    }
}

// ---- simulate, sweep, compare ----------------------------------------------

TEST(Simulate, DeterministicCsv) {
    const auto c = small_config();
    const auto a = ex::run_scenario(c, run_options());
    const auto b = ex::run_scenario(c, run_options());
    EXPECT_EQ(ex::format_series_csv(a.series), ex::format_series_csv(b.series));
    EXPECT_EQ(a.series.size(), 1000u / 20 + 1);
    EXPECT_EQ(a.meta.steps, 1000u);
    EXPECT_GT(a.meta.wall_seconds, 0.0);
}

TEST(Simulate, ZeroPotentialStaysUnrotated) {
    auto c = small_config();
    c.v0 = 0.0;
    const auto run = ex::run_scenario(c, run_options());
    for (const auto& r : run.series) EXPECT_LE(std::abs(r.mam_internal), 1e-5);
}

TEST(Simulate, RejectsUnderResolvedGrid) {
    auto c = small_config();
    c.n1 = 64;
    EXPECT_THROW(ex::run_scenario(c, run_options()), ConfigError);
}

TEST(Sweep, RowsIndependentAndFlagged) {
    const auto c = small_config();
    const double e = units::native_to_ev(2.0);
    const std::vector<double> list{0.0, e, -e};
    const auto r1 = ex::run_sweep(c, list, 2, run_options());
    ASSERT_FALSE(r1.partial());
    EXPECT_LE(std::abs(r1.rows[0].numeric_hbar), 1e-5);
    EXPECT_EQ(r1.rows[0].predicted_hbar, 0.0);
    // predicted column is exactly linear in V0
    EXPECT_EQ(r1.rows[2].predicted_hbar, -r1.rows[1].predicted_hbar);

    const auto r2 = ex::run_sweep(c, {-e, 0.0, e}, 3, run_options());
    EXPECT_EQ(r2.rows[0].numeric_hbar, r1.rows[2].numeric_hbar);
    EXPECT_EQ(r2.rows[1].numeric_hbar, r1.rows[0].numeric_hbar);
    EXPECT_EQ(r2.rows[2].numeric_hbar, r1.rows[1].numeric_hbar);

    const auto r3 = ex::run_sweep(c, {e, 1e-9}, 1, run_options());
    EXPECT_TRUE(r3.partial());
    EXPECT_TRUE(r3.rows[0].ok);
    EXPECT_FALSE(r3.rows[1].ok);
    EXPECT_TRUE(std::isnan(r3.rows[1].numeric_hbar));
    EXPECT_FALSE(r3.rows[1].error.empty());
    const std::string csv = ex::format_sweep_csv(r3);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "V0_eV,mam_numeric_hbar,mam_predicted_hbar,rel_error");
    EXPECT_NE(csv.find("nan"), std::string::npos);
    EXPECT_THROW(ex::run_sweep(c, {}, 1), ConfigError);
}

TEST(Compare, ZeroRunAgainstZeroPrediction) {
    auto c = small_config();
    c.v0 = 0.0;
    const auto run = ex::run_scenario(c, run_options());
    const auto pred = ex::predict(c, true);
    const auto rep = ex::compare(run.series, pred, c.plateau_fraction);
    EXPECT_EQ(rep.reference_hbar, 0.0);
    EXPECT_LE(rep.rel_error, 1e-5 / ex::rel_error_floor);
    EXPECT_EQ(ex::to_json(rep)["rel_error_floor_hbar"].get<double>(), 1e-6);
}

TEST(Compare, FilesWithSidecar) {
    TempDir dir;
    const auto c = small_config();
    const auto run = ex::run_scenario(c, run_options());
    ex::write_text_atomic(dir / "s.csv", ex::format_series_csv(run.series));
    ex::write_text_atomic(ex::metadata_path(dir / "s.csv"), ex::to_json(run.meta).dump());
    ex::write_text_atomic(dir / "p.json", ex::to_json(ex::predict(c, true)).dump());
    const auto rep = ex::compare_files(dir / "s.csv", dir / "p.json", c.plateau_fraction);
    EXPECT_EQ(rep.run_metadata["steps"].get<std::size_t>(), 1000u);
    EXPECT_NEAR(rep.plateau_hbar, ex::plateau(run.series, 0.1), 1e-12);
    EXPECT_NE(ex::to_text(rep).find("relative error"), std::string::npos);

    write_file(dir / "bad.csv", "t_ms,norm,x1_um,x2_um,v1,v2,L_total,mam_internal_hbar\n0,1,0,0,0,0,0,0\n");
    try {
        ex::compare_files(dir / "bad.csv", dir / "p.json");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("L_total"), std::string::npos);
    }
    write_file(dir / "bad.json", "{ not json");
    EXPECT_THROW(ex::compare_files(dir / "s.csv", dir / "bad.json"), ConfigError);
}

// ---- command line -----------------------------------------------------------

TEST(Cli, VerbsAndExitCodes) {
    TempDir dir;
    write_file(dir / "small.toml", small_toml);
    write_file(dir / "bad.toml", replace(small_toml, "ell = 10.0", "ell = 10.0\nbogus = 1"));
    write_file(dir / "strong.toml", replace(small_toml, "V0 = 2.0", "V0 = 1e5"));

    EXPECT_EQ(run_cli("predict --config " + dir / "small.toml" + " --out " + dir / "p.json"), 0);
    EXPECT_TRUE(fs::exists(dir / "p.json"));
    EXPECT_EQ(run_cli("predict --config " + dir / "small.toml" + " --no-analytic-blocks --out " + dir / "pfd.json"), 0);
    EXPECT_EQ(run_cli("simulate --config " + dir / "small.toml" + " --out " + dir / "s.csv"), 0);
    EXPECT_TRUE(fs::exists(dir / "s.csv.meta.json"));
    EXPECT_EQ(run_cli("compare " + dir / "s.csv" + " " + dir / "p.json" + " --out " + dir / "r.json"), 0);
    EXPECT_TRUE(fs::exists(dir / "r.json"));

    EXPECT_EQ(run_cli("predict --config " + dir / "bad.toml"), 2);
    EXPECT_EQ(run_cli("predict --config " + dir / "strong.toml"), 2);
    EXPECT_EQ(run_cli("sweep --config " + dir / "small.toml" + " --v0-list 1e-14,1e-9 --out " + dir / "w.csv"), 3);
    EXPECT_TRUE(fs::exists(dir / "w.csv"));
    EXPECT_EQ(run_cli("sweep --config " + dir / "small.toml" + " --v0-list 1e-14,abc"), 2);
    EXPECT_NE(run_cli("frobnicate"), 0);

    // same config twice: byte-identical CSV
    EXPECT_EQ(run_cli("simulate --config " + dir / "small.toml" + " --out " + dir / "s2.csv"), 0);
    EXPECT_EQ(ex::read_text(dir / "s.csv"), ex::read_text(dir / "s2.csv"));

    // run verb writes all three artefacts
    EXPECT_EQ(run_cli("run --config " + dir / "small.toml" + " --out " + dir / "all"), 0);
    for (const char* ext : {".csv", ".json", ".report.json"}) EXPECT_TRUE(fs::exists(dir / (std::string("all") + ext)));
}
