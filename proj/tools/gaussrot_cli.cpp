// gaussrot: run ridge-crossing scenarios, analytic predictions, V0 sweeps and comparisons.
//
// Exit codes: 0 ok, 2 configuration or regime error, 3 sweep finished with failed rows,
// 1 anything else.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gaussrot/experiment/config.hpp"
#include "gaussrot/experiment/runner.hpp"

namespace ex = gaussrot::experiment;

namespace {

std::string default_wisdom_file() {
    if (const char* e = std::getenv("GAUSSROT_FFTW_WISDOM")) return e;
    std::filesystem::path dir;
    if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) {
        dir = x;
    } else if (const char* h = std::getenv("HOME"); h && *h) {
        dir = std::filesystem::path(h) / ".cache";
    } else {
        return {};
    }
    dir /= "gaussrot";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return {};
    return (dir / "fftw.wisdom").string();
}

ex::RunOptions run_options() {
    ex::RunOptions o;
    o.wisdom_file = default_wisdom_file();
    o.log = [](const std::string& line) { std::cerr << line << "\n"; };
    return o;
}

std::vector<double> parse_v0_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (item.find_first_not_of(" \t", pos) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw gaussrot::ConfigError("--v0-list: cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw gaussrot::ConfigError("--v0-list: no values");
    return out;
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        ex::write_text_atomic(path, text);
    }
}

void write_series(const std::string& path, const ex::ScenarioRun& run) {
    write_or_print(path, ex::format_series_csv(run.series));
    if (!path.empty() && path != "-") ex::write_text_atomic(ex::metadata_path(path), ex::to_json(run.meta).dump(2) + "\n");
}

ex::ScenarioConfig load(const std::string& path) {
    if (path.empty()) return ex::default_config();
    return ex::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rotating Gaussian wave packets crossing a tilted ridge"};
    app.require_subcommand(1);

    std::string config_path, v0_list, series_path, prediction_path;
    std::string sim_out, pred_out, sweep_out, compare_out, run_out;
    bool no_analytic = false;
    unsigned threads = 1;

    auto* simulate = app.add_subcommand("simulate", "grid simulation, writes the observable CSV");
    simulate->add_option("--config", config_path, "scenario TOML (default: built-in parameters)");
    simulate->add_option("--out", sim_out, "CSV output path ('-' for stdout)")->default_val("series.csv");
    simulate->add_option("--threads", threads, "accepted for symmetry with sweep; a single run is serial");

    auto* predict = app.add_subcommand("predict", "analytic prediction only, writes JSON");
    predict->add_option("--config", config_path, "scenario TOML (default: built-in parameters)");
    predict->add_option("--out", pred_out, "JSON output path ('-' for stdout)")->default_val("-");
    predict->add_flag("--no-analytic-blocks", no_analytic, "use finite-difference derivative blocks");

    auto* sweep = app.add_subcommand("sweep", "one grid run per V0, writes the sweep CSV");
    sweep->add_option("--config", config_path, "scenario TOML (default: built-in parameters)");
    sweep->add_option("--v0-list", v0_list, "comma-separated V0 values in eV")->required();
    sweep->add_option("--out", sweep_out, "CSV output path ('-' for stdout)")->default_val("sweep.csv");
    sweep->add_option("--threads", threads, "concurrent runs")->default_val(1)->check(CLI::PositiveNumber);

    auto* comp = app.add_subcommand("compare", "compare a series CSV with a prediction JSON");
    comp->add_option("series", series_path, "series CSV from simulate")->required();
    comp->add_option("prediction", prediction_path, "prediction JSON from predict")->required();
    comp->add_option("--config", config_path, "scenario TOML, for analysis.plateau_fraction");
    comp->add_option("--out", compare_out, "JSON report path (text report always goes to stdout)");

    auto* run = app.add_subcommand("run", "follow the config's mode: simulate, predict or both");
    run->add_option("--config", config_path, "scenario TOML (default: built-in parameters)");
    run->add_option("--out", run_out, "output prefix")->default_val("gaussrot");
    run->add_flag("--no-analytic-blocks", no_analytic, "use finite-difference derivative blocks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            const auto cfg = load(config_path);
            write_series(sim_out, ex::run_scenario(cfg, run_options()));
        } else if (predict->parsed()) {
            const auto cfg = load(config_path);
            const auto p = ex::predict(cfg, !no_analytic);
            for (const auto& w : p.warnings) std::cerr << "warning: " << w << "\n";
            write_or_print(pred_out, ex::to_json(p).dump(2) + "\n");
        } else if (sweep->parsed()) {
            const auto cfg = load(config_path);
            const auto result = ex::run_sweep(cfg, parse_v0_list(v0_list), threads, run_options());
            write_or_print(sweep_out, ex::format_sweep_csv(result));
            if (result.partial()) {
                for (const auto& r : result.rows)
                    if (!r.ok) std::cerr << "row V0 = " << r.v0_ev << " eV failed: " << r.error << "\n";
                return 3;
            }
        } else if (comp->parsed()) {
            const double frac = config_path.empty() ? 0.1 : load(config_path).plateau_fraction;
            const auto report = ex::compare_files(series_path, prediction_path, frac);
            std::cout << ex::to_text(report);
            if (!compare_out.empty()) ex::write_text_atomic(compare_out, ex::to_json(report).dump(2) + "\n");
        } else if (run->parsed()) {
            const auto cfg = load(config_path);
            std::optional<ex::ScenarioRun> sim;
            std::optional<ex::Prediction> pred;
            if (cfg.mode != ex::Mode::predict) {
                sim = ex::run_scenario(cfg, run_options());
                write_series(run_out + ".csv", *sim);
            }
            if (cfg.mode != ex::Mode::simulate) {
                pred = ex::predict(cfg, !no_analytic);
                ex::write_text_atomic(run_out + ".json", ex::to_json(*pred).dump(2) + "\n");
            }
            if (sim && pred) {
                auto report = ex::compare(sim->series, *pred, cfg.plateau_fraction);
                report.run_metadata = ex::to_json(sim->meta);
                std::cout << ex::to_text(report);
                ex::write_text_atomic(run_out + ".report.json", ex::to_json(report).dump(2) + "\n");
            }
        }
    } catch (const gaussrot::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const gaussrot::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const gaussrot::WeaknessError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
