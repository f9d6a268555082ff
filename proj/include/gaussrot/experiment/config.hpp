#pragma once

// Scenario configuration: TOML file with an explicit [units] block. Values are
// kept as written; conversion to working units happens in the accessors.

#include <toml.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "gaussrot/errors.hpp"
#include "gaussrot/grid.hpp"
#include "gaussrot/ridge.hpp"
#include "gaussrot/units.hpp"

namespace gaussrot::experiment {

enum class Mode { simulate, predict, both };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::simulate: return "simulate";
        case Mode::predict: return "predict";
        case Mode::both: return "both";
    }
    return "both";
}

inline Mode parse_mode(std::string_view s) {
    if (s == "simulate") return Mode::simulate;
    if (s == "predict") return Mode::predict;
    if (s == "both") return Mode::both;
    throw ConfigError("config: mode must be simulate, predict or both (got '" + std::string(s) + "')");
}

struct UnitLabels {
    std::string length = "um";       // um | mm
    std::string velocity = "um/ms";  // um/ms | mm/s | m/s
    std::string frequency = "1/ms";  // 1/ms | 1/s
    std::string energy = "native";   // native | eV
    std::string time = "ms";         // ms | s

    double length_factor() const {
        if (length == "um") return 1.0;
        if (length == "mm") return 1e3;
        throw ConfigError("config: units.length must be um or mm (got '" + length + "')");
    }
    double velocity_factor() const {
        if (velocity == "um/ms" || velocity == "mm/s") return 1.0;
        if (velocity == "m/s") return 1e3;
        throw ConfigError("config: units.velocity must be um/ms, mm/s or m/s (got '" + velocity + "')");
    }
    double frequency_factor() const {
        if (frequency == "1/ms") return 1.0;
        if (frequency == "1/s") return 1e-3;
        throw ConfigError("config: units.frequency must be 1/ms or 1/s (got '" + frequency + "')");
    }
    double energy_factor() const {
        if (energy == "native") return 1.0;
        if (energy == "eV") return units::electron_volt;
        throw ConfigError("config: units.energy must be native or eV (got '" + energy + "')");
    }
    double time_factor() const {
        if (time == "ms") return 1.0;
        if (time == "s") return 1e3;
        throw ConfigError("config: units.time must be ms or s (got '" + time + "')");
    }
    void validate() const {
        length_factor();
        velocity_factor();
        frequency_factor();
        energy_factor();
        time_factor();
    }

    bool operator==(const UnitLabels&) const = default;
};

/// Raw config values in the units named by `units`.
struct ScenarioConfig {
    Mode mode = Mode::both;
    UnitLabels units;

    // [packet]
    double q = 300.0;
    double v = 4.0;
    double omega1 = 0.01;
    double omega2 = 0.005;
    double mass = units::lithium7_mass;  // u

    // [ridge]
    double v0 = 0.0;
    double ell = 20.0;

    // [grid]
    std::size_t n1 = 1024, n2 = 512;
    double x1min = -600.0, x1max = 600.0;
    double x2min = -300.0, x2max = 300.0;

    // [timing]; total defaults to 2q/v when absent
    std::optional<double> total;
    double dt = 0.05;
    std::size_t stride = 20;

    // [analysis]
    double plateau_fraction = 0.1;
    bool analytic_blocks = true;
    double weak_warn = 0.1;
    double weak_error = 1.0;

    bool operator==(const ScenarioConfig&) const = default;

    ScenarioParams scenario() const {
        ScenarioParams s;
        s.q = q * units.length_factor();
        s.v = v * units.velocity_factor();
        s.omega1 = omega1 * units.frequency_factor();
        s.omega2 = omega2 * units.frequency_factor();
        s.mass = mass;
        s.validate();
        return s;
    }
    RidgeParams ridge() const {
        RidgeParams r;
        r.v0 = v0 * units.energy_factor();
        r.ell = ell * units.length_factor();
        r.validate();
        return r;
    }
    double v0_ev() const { return units::native_to_ev(v0 * units.energy_factor()); }
    Grid2D grid() const {
        const double f = units.length_factor();
        Grid2D g;
        g.n1 = n1;
        g.n2 = n2;
        g.x1min = x1min * f;
        g.x1max = x1max * f;
        g.x2min = x2min * f;
        g.x2max = x2max * f;
        return g;
    }
    double total_time() const { return total ? *total * units.time_factor() : scenario().t(); }
    double time_step() const { return dt * units.time_factor(); }
    std::size_t steps() const {
        const double n = total_time() / time_step();
        const double r = std::round(n);
        if (std::abs(n - r) > 1e-9 * std::max(1.0, n)) {
            std::ostringstream os;
            os << "config: timing.total (" << total_time() << " ms) is not a whole number of steps of " << time_step()
               << " ms";
            throw ConfigError(os.str());
        }
        return static_cast<std::size_t>(r);
    }

    void validate() const {
        units.validate();
        scenario();
        ridge();
        if (!(dt > 0.0)) throw ConfigError("config: timing.dt must be positive");
        if (stride == 0) throw ConfigError("config: timing.stride must be positive");
        if (total && !(*total > 0.0)) throw ConfigError("config: timing.total must be positive");
        steps();
        if (!(plateau_fraction > 0.0 && plateau_fraction <= 1.0))
            throw ConfigError("config: analysis.plateau_fraction must lie in (0, 1]");
        if (!(weak_warn > 0.0) || !(weak_error >= weak_warn))
            throw ConfigError("config: analysis.weak_warn must be positive and not above weak_error");
    }
};

/// The shipped defaults: 7Li crossing a 20 um ridge, V0 = 1e-14 eV.
inline ScenarioConfig default_config() {
    ScenarioConfig c;
    c.units.velocity = "mm/s";
    c.units.frequency = "1/s";
    c.units.energy = "eV";
    c.omega1 = 10.0;
    c.omega2 = 5.0;
    c.v0 = 1e-14;
    c.total = 150.0;
    return c;
}

namespace detail {

class TableReader {
public:
    TableReader(const toml::table& t, std::string section) : t_(t), section_(std::move(section)) {}

    // Rejects keys that were never asked for.
    void finish() const {
        for (auto&& [k, _] : t_) {
            if (!seen_.count(std::string(k.str())))
                throw ConfigError("config: unknown key '" + prefix() + std::string(k.str()) + "'");
        }
    }

    template <typename T>
    void get(std::string_view key, T& out) {
        seen_.insert(std::string(key));
        const toml::node* n = t_.get(key);
        if (!n) return;
        if constexpr (std::is_same_v<T, double>) {
            if (auto v = n->value<double>()) {
                out = *v;
                return;
            }
        } else if constexpr (std::is_same_v<T, bool>) {
            if (auto v = n->value_exact<bool>()) {
                out = *v;
                return;
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = n->value_exact<std::string>()) {
                out = *v;
                return;
            }
        } else if constexpr (std::is_same_v<T, std::size_t>) {
            if (auto v = n->value_exact<int64_t>(); v && *v >= 0) {
                out = static_cast<std::size_t>(*v);
                return;
            }
        }
        throw ConfigError("config: key '" + prefix() + std::string(key) + "' has the wrong type");
    }

    void get_optional(std::string_view key, std::optional<double>& out) {
        seen_.insert(std::string(key));
        const toml::node* n = t_.get(key);
        if (!n) return;
        if (auto v = n->value<double>()) {
            out = *v;
            return;
        }
        throw ConfigError("config: key '" + prefix() + std::string(key) + "' has the wrong type");
    }

    void get_range(std::string_view key, double& lo, double& hi) {
        seen_.insert(std::string(key));
        const toml::node* n = t_.get(key);
        if (!n) return;
        const toml::array* a = n->as_array();
        if (!a || a->size() != 2 || !(*a)[0].value<double>() || !(*a)[1].value<double>())
            throw ConfigError("config: key '" + prefix() + std::string(key) + "' must be a [min, max] pair");
        lo = *(*a)[0].value<double>();
        hi = *(*a)[1].value<double>();
    }

private:
    std::string prefix() const { return section_.empty() ? "" : section_ + "."; }

    const toml::table& t_;
    std::string section_;
    std::set<std::string> seen_;
};

inline const toml::table& section(const toml::table& root, std::string_view name) {
    static const toml::table empty;
    const toml::node* n = root.get(name);
    if (!n) return empty;
    if (const toml::table* t = n->as_table()) return *t;
    throw ConfigError("config: '" + std::string(name) + "' must be a table");
}

}  // namespace detail

inline ScenarioConfig parse_config(std::string_view text, std::string_view source = "<config>") {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config: " << e.description() << " (" << e.source() << ")";
        throw ConfigError(os.str());
    }
    ScenarioConfig c;
    static const std::set<std::string> known{"mode", "units", "packet", "ridge", "grid", "timing", "analysis"};
    for (auto&& [k, n] : root) {
        if (!known.count(std::string(k.str()))) throw ConfigError("config: unknown key '" + std::string(k.str()) + "'");
    }
    if (const toml::node* m = root.get("mode")) {
        auto s = m->value_exact<std::string>();
        if (!s) throw ConfigError("config: key 'mode' has the wrong type");
        c.mode = parse_mode(*s);
    }
    {
        detail::TableReader u(detail::section(root, "units"), "units");
        u.get("length", c.units.length);
        u.get("velocity", c.units.velocity);
        u.get("frequency", c.units.frequency);
        u.get("energy", c.units.energy);
        u.get("time", c.units.time);
        u.finish();
    }
    {
        detail::TableReader p(detail::section(root, "packet"), "packet");
        p.get("q", c.q);
        p.get("v", c.v);
        p.get("omega1", c.omega1);
        p.get("omega2", c.omega2);
        p.get("mass", c.mass);
        p.finish();
    }
    {
        detail::TableReader r(detail::section(root, "ridge"), "ridge");
        r.get("V0", c.v0);
        r.get("ell", c.ell);
        r.finish();
    }
    {
        detail::TableReader g(detail::section(root, "grid"), "grid");
        g.get("n1", c.n1);
        g.get("n2", c.n2);
        g.get_range("x1", c.x1min, c.x1max);
        g.get_range("x2", c.x2min, c.x2max);
        g.finish();
    }
    {
        detail::TableReader t(detail::section(root, "timing"), "timing");
        t.get_optional("total", c.total);
        t.get("dt", c.dt);
        t.get("stride", c.stride);
        t.finish();
    }
    {
        detail::TableReader a(detail::section(root, "analysis"), "analysis");
        a.get("plateau_fraction", c.plateau_fraction);
        a.get("analytic_blocks", c.analytic_blocks);
        a.get("weak_warn", c.weak_warn);
        a.get("weak_error", c.weak_error);
        a.finish();
    }
    c.validate();
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path);
}

inline toml::table to_toml(const ScenarioConfig& c) {
    toml::table root;
    root.insert("mode", to_string(c.mode));
    root.insert("units", toml::table{{"length", c.units.length},
                                     {"velocity", c.units.velocity},
                                     {"frequency", c.units.frequency},
                                     {"energy", c.units.energy},
                                     {"time", c.units.time}});
    root.insert("packet",
                toml::table{{"q", c.q}, {"v", c.v}, {"omega1", c.omega1}, {"omega2", c.omega2}, {"mass", c.mass}});
    root.insert("ridge", toml::table{{"V0", c.v0}, {"ell", c.ell}});
    root.insert("grid", toml::table{{"n1", static_cast<int64_t>(c.n1)},
                                    {"n2", static_cast<int64_t>(c.n2)},
                                    {"x1", toml::array{c.x1min, c.x1max}},
                                    {"x2", toml::array{c.x2min, c.x2max}}});
    toml::table timing{{"dt", c.dt}, {"stride", static_cast<int64_t>(c.stride)}};
    if (c.total) timing.insert("total", *c.total);
    root.insert("timing", std::move(timing));
    root.insert("analysis", toml::table{{"plateau_fraction", c.plateau_fraction},
                                        {"analytic_blocks", c.analytic_blocks},
                                        {"weak_warn", c.weak_warn},
                                        {"weak_error", c.weak_error}});
    return root;
}

inline std::string to_toml_string(const ScenarioConfig& c) {
    std::ostringstream os;
    os << to_toml(c) << "\n";
    return os.str();
}

}  // namespace gaussrot::experiment
