#pragma once

// Scenario runs, analytic predictions, V0 sweeps and run/prediction comparison.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gaussrot/eikonal.hpp"
#include "gaussrot/errors.hpp"
#include "gaussrot/experiment/config.hpp"
#include "gaussrot/grid.hpp"
#include "gaussrot/ridge.hpp"

namespace gaussrot::experiment {

using json = nlohmann::json;

/// Floor used in relative errors, in hbar.
inline constexpr double rel_error_floor = 1e-6;

inline double relative_error(double numeric, double reference) {
    return std::abs(numeric - reference) / std::max(std::abs(reference), rel_error_floor);
}

struct RunOptions {
    std::string wisdom_file;  // see PropagatorOptions::wisdom_file
    bool measure_plans = true;
    std::function<void(const std::string&)> log;  // startup report and warnings
};

struct RunMetadata {
    Grid2D grid;
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t stride = 0;
    double v0_ev = 0.0;
    double wall_seconds = 0.0;
    GridCheck grid_check;
    RegimeRatios regime;
    double weakness_ratio = 0.0;
    std::vector<std::string> warnings;
};

struct ScenarioRun {
    ObservableSeries series;
    RunMetadata meta;
};

inline json to_json(const RegimeRatios& r) {
    return json{{"small_packet", r.small_packet}, {"fast_packet", r.fast_packet}, {"narrow_ridge", r.narrow_ridge}};
}

inline RegimeRatios regime_from_json(const json& j) {
    RegimeRatios r;
    r.small_packet = j.at("small_packet").get<double>();
    r.fast_packet = j.at("fast_packet").get<double>();
    r.narrow_ridge = j.at("narrow_ridge").get<double>();
    return r;
}

inline json to_json(const RunMetadata& m) {
    return json{{"grid",
                 {{"n1", m.grid.n1},
                  {"n2", m.grid.n2},
                  {"x1_um", {m.grid.x1min, m.grid.x1max}},
                  {"x2_um", {m.grid.x2min, m.grid.x2max}}}},
                {"dt_ms", m.dt},
                {"steps", m.steps},
                {"stride", m.stride},
                {"V0_eV", m.v0_ev},
                {"wall_seconds", m.wall_seconds},
                {"resolution_ratio", m.grid_check.resolution_ratio},
                {"padding_ratio", m.grid_check.padding_ratio},
                {"regime", to_json(m.regime)},
                {"weakness_ratio", m.weakness_ratio},
                {"warnings", m.warnings}};
}

namespace detail {

inline EikonalOptions eikonal_options(const ScenarioConfig& c, bool analytic_blocks,
                                      std::vector<std::string>* warnings) {
    EikonalOptions o;
    o.use_analytic_blocks = analytic_blocks;
    o.weak_warn = c.weak_warn;
    o.weak_error = c.weak_error;
    if (warnings) o.warn = [warnings](const std::string& w) { warnings->push_back(w); };
    return o;
}

// Regime ratios plus the swept weakness ratio; WeaknessError above the hard bound.
inline std::pair<RegimeRatios, double> regime_report(const ScenarioConfig& c, std::vector<std::string>& warnings) {
    const ScenarioParams s = c.scenario();
    const RidgeParams r = c.ridge();
    RegimeRatios reg = regime_ratios(s, r);
    for (auto& w : reg.warnings()) warnings.push_back(w);
    const auto opts = eikonal_options(c, true, &warnings);
    const double weak = swept_weakness_ratio(scenario_packet(s), make_ridge_potential(r), s.t(), opts);
    return {reg, weak};
}

inline void emit(const RunOptions& o, const std::string& line) {
    if (o.log) o.log(line);
}

}  // namespace detail

/// Grid simulation of the configured scenario.
inline ScenarioRun run_scenario(const ScenarioConfig& c, const RunOptions& o = {}) {
    c.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ScenarioRun run;
    RunMetadata& m = run.meta;
    m.grid = c.grid();
    m.dt = c.time_step();
    m.steps = c.steps();
    m.stride = c.stride;
    m.v0_ev = c.v0_ev();

    const ScenarioParams s = c.scenario();
    const RidgeParams r = c.ridge();
    auto [reg, weak] = detail::regime_report(c, m.warnings);
    m.regime = reg;
    m.weakness_ratio = weak;
    const GaussianPacket<2> packet = scenario_packet(s);
    m.grid_check = check_grid(m.grid, packet, c.total_time());

    {
        std::ostringstream os;
        os << "regime ratios: small_packet=" << reg.small_packet << " fast_packet=" << reg.fast_packet
           << " narrow_ridge=" << reg.narrow_ridge << " weakness=" << weak
           << " resolution=" << m.grid_check.resolution_ratio << " padding=" << m.grid_check.padding_ratio;
        detail::emit(o, os.str());
        for (const auto& w : m.warnings) detail::emit(o, "warning: " + w);
    }

    PropagatorOptions po;
    po.measure_plans = o.measure_plans;
    po.wisdom_file = o.wisdom_file;
    SplitStepPropagator prop(m.grid, make_ridge_potential(r), s.mass, m.dt, po);
    WaveField f = init_field(packet, m.grid, c.total_time());
    run.series = run_series(prop, f, m.steps, m.stride);
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

// ---- CSV ------------------------------------------------------------------

inline const std::vector<std::string>& series_columns() {
    static const std::vector<std::string> cols{"t_ms", "norm", "x1_um",          "x2_um",
                                               "v1",   "v2",   "mam_total_hbar", "mam_internal_hbar"};
    return cols;
}

inline std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.8e", x);
    return buf;
}

inline std::string format_series_csv(const ObservableSeries& s) {
    std::string out;
    const auto& cols = series_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += "\n";
    for (const auto& r : s) {
        const double vals[] = {r.t, r.norm, r.mean_position[0], r.mean_position[1], r.mean_velocity[0],
                               r.mean_velocity[1], r.mam_total, r.mam_internal};
        for (std::size_t i = 0; i < std::size(vals); ++i) out += (i ? "," : "") + format_number(vals[i]);
        out += "\n";
    }
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    return out;
}

inline ObservableSeries parse_series_csv(const std::string& text, const std::string& source = "<series>") {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw ConfigError(source + ": empty series file");
    const auto header = split_csv_line(line);
    const auto& cols = series_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i >= header.size()) throw ConfigError(source + ": missing column '" + cols[i] + "'");
        if (header[i] != cols[i]) {
            throw ConfigError(source + ": column " + std::to_string(i + 1) + " is '" + header[i] + "', expected '" +
                              cols[i] + "' (units or layout mismatch)");
        }
    }
    if (header.size() > cols.size()) throw ConfigError(source + ": unexpected column '" + header[cols.size()] + "'");
    ObservableSeries s;
    std::size_t lineno = 1;
    while (std::getline(ss, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != cols.size())
            throw ConfigError(source + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                              " fields");
        double v[8];
        for (std::size_t i = 0; i < 8; ++i) {
            try {
                std::size_t pos = 0;
                v[i] = std::stod(cells[i], &pos);
                if (pos != cells[i].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError(source + ": line " + std::to_string(lineno) + ", column '" + cols[i] +
                                  "' is not a number");
            }
        }
        ObservableRecord r;
        r.t = v[0];
        r.norm = v[1];
        r.mean_position = Vec<2>{v[2], v[3]};
        r.mean_velocity = Vec<2>{v[4], v[5]};
        r.mam_total = v[6];
        r.mam_internal = v[7];
        s.push_back(r);
    }
    if (s.empty()) throw ConfigError(source + ": no data rows");
    return s;
}

inline std::string read_text(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Writes via a temporary file and rename, so readers never see partial output.
inline void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("cannot open " + tmp + " for writing");
        os << text;
        if (!os) throw ConfigError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw ConfigError("cannot rename " + tmp + " to " + path);
}

inline std::string metadata_path(const std::string& series_path) { return series_path + ".meta.json"; }

// ---- analysis -------------------------------------------------------------

/// Mean internal MAM over the final `fraction` of samples.
inline double plateau(const ObservableSeries& s, double fraction = 0.1) {
    if (s.empty()) throw ConfigError("plateau: empty series");
    const std::size_t n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(s.size()) - 1e-9)));
    double sum = 0.0;
    for (std::size_t i = s.size() - n; i < s.size(); ++i) sum += s[i].mam_internal;
    return sum / static_cast<double>(n);
}

/// Sample with the largest |internal MAM|.
inline const ObservableRecord& internal_extremum(const ObservableSeries& s) {
    if (s.empty()) throw ConfigError("extremum: empty series");
    return *std::max_element(s.begin(), s.end(), [](const auto& a, const auto& b) {
        return std::abs(a.mam_internal) < std::abs(b.mam_internal);
    });
}

struct Prediction {
    double t_ms = 0.0;
    double v0_ev = 0.0;
    double generic_hbar = 0.0;
    std::optional<double> closed_form_hbar;
    ComplexMat<2> delta_omega{};
    bool analytic_blocks = true;
    bool grid_invoked = false;
    RegimeRatios regime;
    double weakness_ratio = 0.0;
    std::vector<std::string> warnings;

    double reference() const { return closed_form_hbar ? *closed_form_hbar : generic_hbar; }
    double route_difference() const {
        return closed_form_hbar ? std::abs(generic_hbar - *closed_form_hbar) /
                                      std::max(std::abs(*closed_form_hbar), std::numeric_limits<double>::min())
                                : 0.0;
    }
};

/// Analytic pipeline only; never touches the grid solver.
inline Prediction predict(const ScenarioConfig& c, bool analytic_blocks) {
    c.validate();
    const long grid_before = grid_invocations().load();
    Prediction p;
    p.analytic_blocks = analytic_blocks;
    const ScenarioParams s = c.scenario();
    const RidgeParams r = c.ridge();
    p.t_ms = s.t();
    p.v0_ev = c.v0_ev();
    auto [reg, weak] = detail::regime_report(c, p.warnings);
    p.regime = reg;
    p.weakness_ratio = weak;

    const GaussianPacket<2> packet = scenario_packet(s);
    const auto opts = detail::eikonal_options(c, analytic_blocks, nullptr);
    const PotentialModel<2> v = make_ridge_potential(r);
    p.delta_omega = delta_omega(packet, v, p.t_ms, opts);
    p.generic_hbar = delta_mam(packet, p.delta_omega, p.t_ms)[2] / units::hbar;
    p.closed_form_hbar = closed_form_delta_mam(s, r);
    p.grid_invoked = grid_invocations().load() != grid_before;
    if (p.grid_invoked) throw std::logic_error("predict: grid solver was invoked");
    return p;
}

inline json to_json(const Prediction& p) {
    json j{{"units", {{"angular_momentum", "hbar"}, {"time", "ms"}, {"energy", "eV"}}},
           {"t_ms", p.t_ms},
           {"V0_eV", p.v0_ev},
           {"delta_mam_generic_hbar", p.generic_hbar},
           {"analytic_blocks", p.analytic_blocks},
           {"grid_invoked", p.grid_invoked},
           {"delta_omega",
            {{"re", {{p.delta_omega(0, 0).real(), p.delta_omega(0, 1).real()},
                     {p.delta_omega(1, 0).real(), p.delta_omega(1, 1).real()}}},
             {"im", {{p.delta_omega(0, 0).imag(), p.delta_omega(0, 1).imag()},
                     {p.delta_omega(1, 0).imag(), p.delta_omega(1, 1).imag()}}}}},
           {"regime", to_json(p.regime)},
           {"weakness_ratio", p.weakness_ratio},
           {"warnings", p.warnings}};
    if (p.closed_form_hbar) {
        j["delta_mam_closed_form_hbar"] = *p.closed_form_hbar;
        j["route_relative_difference"] = p.route_difference();
    }
    return j;
}

inline Prediction prediction_from_json(const json& j, const std::string& source = "<prediction>") {
    try {
        const auto& u = j.at("units");
        if (u.at("angular_momentum").get<std::string>() != "hbar")
            throw ConfigError(source + ": field 'units.angular_momentum' must be 'hbar'");
        if (u.at("time").get<std::string>() != "ms") throw ConfigError(source + ": field 'units.time' must be 'ms'");
        Prediction p;
        p.t_ms = j.at("t_ms").get<double>();
        p.v0_ev = j.value("V0_eV", 0.0);
        p.generic_hbar = j.at("delta_mam_generic_hbar").get<double>();
        if (j.contains("delta_mam_closed_form_hbar")) p.closed_form_hbar = j["delta_mam_closed_form_hbar"].get<double>();
        p.analytic_blocks = j.value("analytic_blocks", true);
        p.grid_invoked = j.value("grid_invoked", false);
        if (j.contains("regime")) p.regime = regime_from_json(j["regime"]);
        p.weakness_ratio = j.value("weakness_ratio", 0.0);
        if (j.contains("warnings")) p.warnings = j["warnings"].get<std::vector<std::string>>();
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

// ---- sweep ----------------------------------------------------------------

struct SweepRow {
    double v0_ev = 0.0;
    double numeric_hbar = std::numeric_limits<double>::quiet_NaN();
    double predicted_hbar = std::numeric_limits<double>::quiet_NaN();
    double rel_error = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    std::string error;
    ObservableSeries series;  // kept for inspection, not written to the sweep CSV
};

struct SweepResult {
    std::vector<SweepRow> rows;
    bool partial() const {
        return std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.ok; });
    }
};

inline ScenarioConfig with_v0_ev(ScenarioConfig c, double v0_ev) {
    c.v0 = v0_ev * units::electron_volt / c.units.energy_factor();
    return c;
}

/// One independent scenario run per V0 (in eV); runs execute on up to `threads` workers.
inline SweepResult run_sweep(const ScenarioConfig& base, const std::vector<double>& v0_ev, unsigned threads,
                             const RunOptions& o = {}) {
    if (v0_ev.empty()) throw ConfigError("sweep: empty V0 list");
    base.validate();
    SweepResult out;
    out.rows.resize(v0_ev.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    RunOptions quiet = o;
    quiet.log = nullptr;
    auto worker = [&] {
        for (std::size_t i = next++; i < v0_ev.size(); i = next++) {
            SweepRow& row = out.rows[i];
            row.v0_ev = v0_ev[i];
            try {
                const ScenarioConfig c = with_v0_ev(base, v0_ev[i]);
                ScenarioRun run = run_scenario(c, quiet);
                row.numeric_hbar = plateau(run.series, c.plateau_fraction);
                row.predicted_hbar = closed_form_delta_mam(c.scenario(), c.ridge());
                row.rel_error = relative_error(row.numeric_hbar, row.predicted_hbar);
                row.series = std::move(run.series);
                row.ok = true;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            if (o.log) {
                std::lock_guard lock(log_mutex);
                std::ostringstream os;
                os << "V0 = " << row.v0_ev << " eV: "
                   << (row.ok ? "numeric " + format_number(row.numeric_hbar) + " hbar" : "FAILED: " + row.error);
                o.log(os.str());
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(v0_ev.size())));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

inline std::string format_sweep_csv(const SweepResult& r) {
    std::string out = "V0_eV,mam_numeric_hbar,mam_predicted_hbar,rel_error\n";
    for (const auto& row : r.rows) {
        out += format_number(row.v0_ev) + "," + format_number(row.numeric_hbar) + "," +
               format_number(row.predicted_hbar) + "," + format_number(row.rel_error) + "\n";
    }
    return out;
}

// ---- comparison -----------------------------------------------------------

struct ComparisonReport {
    double plateau_hbar = 0.0;
    std::size_t plateau_samples = 0;
    double predicted_closed_form_hbar = std::numeric_limits<double>::quiet_NaN();
    double predicted_generic_hbar = 0.0;
    double reference_hbar = 0.0;
    double rel_error = 0.0;
    double peak_time_ms = 0.0;
    double peak_hbar = 0.0;
    RegimeRatios regime;
    json run_metadata = json::object();
};

inline ComparisonReport compare(const ObservableSeries& s, const Prediction& p, double plateau_fraction = 0.1) {
    ComparisonReport r;
    r.plateau_hbar = plateau(s, plateau_fraction);
    r.plateau_samples = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(plateau_fraction * static_cast<double>(s.size()) - 1e-9)));
    if (p.closed_form_hbar) r.predicted_closed_form_hbar = *p.closed_form_hbar;
    r.predicted_generic_hbar = p.generic_hbar;
    r.reference_hbar = p.reference();
    r.rel_error = relative_error(r.plateau_hbar, r.reference_hbar);
    const auto& peak = internal_extremum(s);
    r.peak_time_ms = peak.t;
    r.peak_hbar = peak.mam_internal;
    r.regime = p.regime;
    return r;
}

inline ComparisonReport compare_files(const std::string& series_path, const std::string& prediction_path,
                                      double plateau_fraction = 0.1) {
    const ObservableSeries s = parse_series_csv(read_text(series_path), series_path);
    json pj;
    try {
        pj = json::parse(read_text(prediction_path));
    } catch (const json::parse_error& e) {
        throw ConfigError(prediction_path + ": " + e.what());
    }
    ComparisonReport r = compare(s, prediction_from_json(pj, prediction_path), plateau_fraction);
    std::ifstream meta(metadata_path(series_path));
    if (meta) {
        try {
            r.run_metadata = json::parse(meta);
        } catch (const json::parse_error&) {
            r.run_metadata = json{{"error", "unreadable metadata sidecar"}};
        }
    }
    return r;
}

inline json to_json(const ComparisonReport& r) {
    json j{{"units", {{"angular_momentum", "hbar"}, {"time", "ms"}}},
           {"plateau_hbar", r.plateau_hbar},
           {"plateau_samples", r.plateau_samples},
           {"predicted_generic_hbar", r.predicted_generic_hbar},
           {"reference_hbar", r.reference_hbar},
           {"rel_error", r.rel_error},
           {"rel_error_floor_hbar", rel_error_floor},
           {"peak_time_ms", r.peak_time_ms},
           {"peak_hbar", r.peak_hbar},
           {"regime", to_json(r.regime)},
           {"run", r.run_metadata}};
    if (!std::isnan(r.predicted_closed_form_hbar)) j["predicted_closed_form_hbar"] = r.predicted_closed_form_hbar;
    return j;
}

inline std::string to_text(const ComparisonReport& r) {
    std::ostringstream os;
    os << "plateau internal MAM : " << format_number(r.plateau_hbar) << " hbar (mean of last " << r.plateau_samples
       << " samples)\n";
    if (!std::isnan(r.predicted_closed_form_hbar))
        os << "closed-form shift    : " << format_number(r.predicted_closed_form_hbar) << " hbar\n";
    os << "generic pipeline     : " << format_number(r.predicted_generic_hbar) << " hbar\n";
    os << "relative error       : " << format_number(r.rel_error) << "\n";
    os << "|MAM| extremum       : " << format_number(r.peak_hbar) << " hbar at t = " << r.peak_time_ms << " ms\n";
    os << "regime ratios        : small_packet " << r.regime.small_packet << ", fast_packet " << r.regime.fast_packet
       << ", narrow_ridge " << r.regime.narrow_ridge << "\n";
    if (r.run_metadata.contains("wall_seconds"))
        os << "run wall time        : " << r.run_metadata["wall_seconds"].get<double>() << " s\n";
    return os.str();
}

}  // namespace gaussrot::experiment
