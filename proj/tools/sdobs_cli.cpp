// sdobs: validate, inspect, run and sweep sampled-data observer scenarios.
//
// Exit codes: 0 success, 1 validation/configuration failure, 2 divergence.

#include "sdobs/analysis.hpp"
#include "sdobs/io.hpp"
#include "sdobs/scenario.hpp"
#include "sdobs/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace sdobs;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kDiverged = 2;

std::string g3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void print_error(const std::string& kind, const std::string& message) {
    nlohmann::json doc;
    doc["ok"] = false;
    doc["error"] = kind;
    doc["message"] = message;
    std::cout << doc.dump(2) << '\n';
}

void print_constants(const Setup& s) {
    if (s.constants) {
        const auto& c = *s.constants;
        std::cout << "sigma    = " << g3(c.sigma) << '\n'
                  << "gamma    = " << g3(c.gamma) << '\n'
                  << "C        = " << g3(c.C) << '\n'
                  << "M_slope  = " << g3(c.M_slope) << '\n'
                  << "B_simple = " << g3(c.B_simple) << '\n'
                  << "B_star   = " << g3(c.B_star) << '\n';
    }
    if (std::isfinite(s.L)) std::cout << "L        = " << g3(s.L) << '\n';
    if (s.cascade) {
        std::cout << "delta    = " << g3(s.cascade->delta) << '\n'
                  << "beta     = " << g3(s.theory.beta) << '\n'
                  << "beta^p   = " << g3(s.theory.beta_p) << '\n';
    }
    if (s.gas_predictor) {
        std::cout << "G1       = " << g3(s.gas_predictor->G1) << '\n'
                  << "G2       = " << g3(s.gas_predictor->G2) << '\n'
                  << "beta_gas = " << g3(s.theory.beta) << '\n';
    }
    if (!std::isnan(s.theory.Gamma)) std::cout << "Gamma    = " << g3(s.theory.Gamma) << '\n';
    std::cout << "dt       = " << g3(s.dt) << '\n';
}

void print_checks(const Scenario& sc, const Setup& s) {
    for (const Check& c : s.report.checks) {
        std::string line;
        if (c.name.rfind("small gain", 0) == 0) {
            line = "C·B·e^{σB} = " + g3(c.value) + (c.pass ? " < 1" : " >= 1");
            line += "  (B = " + g3(sc.sampling.B) + ")";
        } else {
            line = c.name + " = " + g3(c.value) + (c.pass ? " ok" : " FAIL") + " (limit " +
                   g3(c.limit) + ")";
        }
        if (!c.required) line += " [advisory]";
        if (!c.detail.empty()) line += "  " + c.detail;
        std::cout << (c.pass ? "[pass] " : "[fail] ") << line << '\n';
    }
}

int cmd_validate(const std::string& path, std::optional<std::uint64_t> seed, bool constants_only) {
    try {
        const LoadedScenario loaded = load_scenario(path, seed);
        const Setup setup = prepare(loaded.scenario);
        print_constants(setup);
        if (constants_only) return kOk;
        print_checks(loaded.scenario, setup);
        if (!setup.report.ok()) {
            std::cout << report_json(setup) << '\n';
            return kInvalid;
        }
        std::cout << "valid\n";
        return kOk;
    } catch (const Error& e) {
        print_error("configuration", e.what());
        return kInvalid;
    }
}

int cmd_run(const std::string& path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            bool force) {
    try {
        const LoadedScenario loaded = load_scenario(path, seed);
        const Scenario& sc = loaded.scenario;
        const Setup setup = prepare(sc);
        if (!force && !setup.report.ok()) {
            std::cout << report_json(setup) << '\n';
            return kInvalid;
        }
        SimTrace trace = simulate(sc, setup);
        trace.config_hash = loaded.hash;
        const Metrics metrics = compute_metrics(sc, setup, trace);

        std::filesystem::create_directories(out_dir);
        const std::filesystem::path dir(out_dir);
        std::ofstream csv(dir / "trace.csv");
        write_trace_csv(trace, csv);
        std::ofstream events(dir / "events.csv");
        write_events_csv(trace, events);
        std::ofstream metrics_file(dir / "metrics.json");
        metrics_file << metrics_json(sc, metrics, trace) << '\n';
        if (!csv || !events || !metrics_file) {
            print_error("io", "failed to write outputs under " + out_dir);
            return kInvalid;
        }
        std::cout << "wrote " << trace.size() << " rows, " << trace.events.size()
                  << " resets to " << out_dir << '\n';
        std::cout << "terminal error " << g3(primary_channel(trace).empty() ? NAN : primary_channel(trace).back())
                  << ", fitted rate " << g3(metrics.fitted_rate) << '\n';
        return kOk;
    } catch (const IntegrationDiverged& e) {
        nlohmann::json doc;
        doc["ok"] = false;
        doc["error"] = "diverged";
        doc["time"] = e.time();
        doc["channel"] = e.channel();
        std::cout << doc.dump(2) << '\n';
        return kDiverged;
    } catch (const Error& e) {
        print_error("configuration", e.what());
        return kInvalid;
    }
}

std::string dotted_key(const std::string& param) {
    if (param == "B") return "sampling.B";
    if (param == "b") return "sampling.b";
    if (param == "p") return "predictor.p";
    if (param == "mu") return "predictor.mu";
    if (param == "sigma") return "predictor.sigma";
    if (param == "r") return "delay";
    if (param == "epsilon") return "noise.epsilon";
    return param;
}

int cmd_sweep(const std::string& path, const std::string& param, const std::vector<double>& values,
              std::optional<std::uint64_t> seed) {
    std::ifstream in(path);
    if (!in) {
        print_error("configuration", "cannot open scenario file '" + path + "'");
        return kInvalid;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const std::string key = dotted_key(param);

    std::cout << param << ",conditions_ok,small_gain,converged,terminal_error,fitted_rate\n";
    for (double v : values) {
        std::cout << g3(v) << ',';
        try {
            LoadedScenario loaded = parse_scenario(override_parameter(text, key, v), seed);
            Scenario& sc = loaded.scenario;
            if (key == "sampling.B" && sc.sampling.b > sc.sampling.B) sc.sampling.b = sc.sampling.B;
            if (key == "sampling.B" && sc.sampling.kind == ScheduleKind::uniform) sc.sampling.b = v;
            const Setup setup = prepare(sc);
            const SimTrace trace = simulate(sc, setup);
            const Metrics m = compute_metrics(sc, setup, trace);
            const auto& main = primary_channel(trace);
            std::cout << (m.conditions_ok ? "true" : "false") << ',' << g3(m.theory.small_gain)
                      << ',' << (m.converged ? "true" : "false") << ','
                      << g3(main.empty() ? NAN : main.back()) << ',' << g3(m.fitted_rate) << '\n';
        } catch (const IntegrationDiverged& e) {
            std::cout << "false,nan,diverged,nan,nan\n";
        } catch (const Error& e) {
            std::cout << "error," << '"' << e.what() << '"' << '\n';
        }
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sampled-data observers with delayed measurements"};
    app.require_subcommand(1);

    std::string config, out_dir, param;
    std::vector<double> values;
    std::optional<std::uint64_t> seed;
    bool force = false;

    auto* validate = app.add_subcommand("validate", "Check all gain conditions and print constants");
    validate->add_option("config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
    validate->add_option("--seed", seed, "Override sampling/noise seeds");

    auto* constants = app.add_subcommand("constants", "Print derived constants");
    constants->add_option("config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);

    auto* run = app.add_subcommand("run", "Simulate and write trace.csv, events.csv, metrics.json");
    run->add_option("config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--seed", seed, "Override sampling/noise seeds");
    run->add_flag("--force", force, "Run even when a gain condition fails");

    auto* sweep = app.add_subcommand("sweep", "Run a grid over one parameter");
    sweep->add_option("config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--param", param, "B, b, p, mu, sigma, r, epsilon or a dotted key")->required();
    sweep->add_option("--values", values, "Parameter values")->required()->delimiter(',');
    sweep->add_option("--seed", seed, "Override sampling/noise seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInvalid;
    }

    if (*validate) return cmd_validate(config, seed, false);
    if (*constants) return cmd_validate(config, seed, true);
    if (*run) return cmd_run(config, out_dir, seed, force);
    if (*sweep) return cmd_sweep(config, param, values, seed);
    return kInvalid;
}
