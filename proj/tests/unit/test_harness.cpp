#include "sdobs/analysis.hpp"
#include "sdobs/io.hpp"
#include "sdobs/scenario.hpp"
#include "sdobs/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace sdobs;
using doctest::Approx;

namespace {

std::string read(const std::string& name) {
    std::ifstream in(std::string(SDOBS_CONFIG_DIR) + "/" + name);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Scenario short_benchmark(double horizon = 4.0) {
    Scenario sc = parse_scenario(read("scalar_benchmark.json"), std::nullopt).scenario;
    sc.horizon = horizon;
    return sc;
}

}  // namespace

TEST_CASE("scenario parsing and hashing") {
    const std::string text = read("scalar_benchmark.json");
    const LoadedScenario a = parse_scenario(text, std::nullopt);
    const LoadedScenario b = parse_scenario(text, std::nullopt);
    CHECK(a.hash == b.hash);
    CHECK(a.hash.size() == 16);
    CHECK(a.scenario.delay == 0.5);
    CHECK(a.scenario.predictor.kind == PredictorKind::cascade);
    CHECK(a.scenario.observer.K(0, 0) == -3.0);

    const LoadedScenario seeded = parse_scenario(text, 42);
    CHECK(seeded.scenario.seed == 42);
    CHECK(seeded.scenario.sampling.seed == 42);
    CHECK(seeded.scenario.noise.seed == 42);
    CHECK(seeded.hash != a.hash);

    const LoadedScenario changed = parse_scenario(override_parameter(text, "sampling.B", 0.2), std::nullopt);
    CHECK(changed.scenario.sampling.B == 0.2);

    CHECK_THROWS_AS(prepare(parse_scenario("{\"plant\": {\"kind\": \"nope\"}}", std::nullopt).scenario),
                    ConfigError);
    CHECK_THROWS_AS(parse_scenario("not json", std::nullopt), ConfigError);
}

TEST_CASE("prepare reports every condition for the benchmark") {
    const Setup s = prepare(short_benchmark());
    CHECK(s.report.ok());
    CHECK(s.theory.small_gain == Approx(0.6074364634).epsilon(1e-9));
    CHECK(s.theory.beta == Approx(2.8467422494).epsilon(1e-9));
    CHECK(s.theory.Gamma == Approx(14.6831012308).epsilon(1e-9));
    CHECK(s.dt == Approx(1e-3));
}

TEST_CASE("prepare flags a violated small-gain condition and enforce throws") {
    Scenario sc = short_benchmark();
    sc.sampling.b = sc.sampling.B = 0.5;
    const Setup s = prepare(sc);
    CHECK_FALSE(s.report.ok());
    CHECK(s.report.first_failure()->name.find("small gain") != std::string::npos);
    CHECK_THROWS_AS(enforce(s.report), GainConditionViolated);
}

TEST_CASE("prepare rejects inconsistent modes") {
    Scenario sc = short_benchmark();
    sc.mode = Mode::predictor_only;
    sc.predictor.kind = PredictorKind::none;
    CHECK_THROWS_AS(prepare(sc), ConfigError);

    Scenario gas = short_benchmark();
    gas.predictor.kind = PredictorKind::gas;
    CHECK_THROWS_AS(prepare(gas), ConfigError);
}

TEST_CASE("simulation is deterministic and converges on the benchmark") {
    const Scenario sc = short_benchmark(6.0);
    const SimTrace a = run_scenario(sc);
    const SimTrace b = run_scenario(sc);
    CHECK(a.e_pred == b.e_pred);
    CHECK(a.e_pred.back() < 1e-2 * a.e_pred.front());
    CHECK(a.events.size() == 20);  // resets at 0.3, 0.6, ..., 6.0
    CHECK(a.t.back() == Approx(6.0));
    CHECK(a.stage_err.size() == 1);
}

TEST_CASE("observer-only mode tracks the delayed state") {
    Scenario sc = short_benchmark(6.0);
    sc.mode = Mode::observer_only;
    const SimTrace tr = run_scenario(sc);
    CHECK(tr.e_pred.empty());
    CHECK(tr.e_obs.back() < 1e-2 * tr.e_obs.front());
}

TEST_CASE("divergence surfaces with time and channel") {
    Scenario sc = short_benchmark(10.0);
    sc.plant.a = 90.0;
    sc.observer.L = 90.0;
    const Setup s = prepare(sc);
    try {
        simulate(sc, s);
        FAIL("expected divergence");
    } catch (const IntegrationDiverged& e) {
        CHECK(e.time() > 0.0);
        CHECK_FALSE(e.channel().empty());
    }
}

TEST_CASE("decay fit and ISS helpers") {
    std::vector<double> t, e;
    for (int k = 0; k <= 100; ++k) {
        t.push_back(0.1 * k);
        e.push_back(3.0 * std::exp(-0.7 * t.back()));
    }
    const DecayFit fit = fit_decay_rate(t, e, 1.0, 9.0);
    CHECK(fit.rate == Approx(0.7));
    CHECK(fit.amplitude == Approx(3.0));
    CHECK_FALSE(fit.degenerate);
    CHECK(fit_decay_rate(t, std::vector<double>(t.size(), 0.0), 0.0, 10.0).degenerate);
    CHECK(tail_sup(t, e, 5.0) == Approx(3.0 * std::exp(-3.5)));
}

TEST_CASE("metrics and CSV output") {
    const Scenario sc = short_benchmark(3.0);
    const Setup s = prepare(sc);
    const SimTrace tr = simulate(sc, s);
    const Metrics m = compute_metrics(sc, s, tr);
    CHECK(m.conditions_ok);
    CHECK(m.theory.Gamma == Approx(14.6831012308).epsilon(1e-9));

    std::ostringstream csv, events;
    write_trace_csv(tr, csv);
    write_events_csv(tr, events);
    CHECK(csv.str().rfind("t,x_1,z_1,w_1,xi_p_1,e_obs,e_pred\n", 0) == 0);
    CHECK(events.str().rfind("tau,v_1,w_pre_1,w_post_1\n", 0) == 0);
    CHECK(metrics_json(sc, m, tr).find("\"measured\"") != std::string::npos);
    CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("every shipped configuration prepares cleanly") {
    for (const char* name : {"scalar_benchmark.json", "scalar_noisy.json", "scalar_jittered.json",
                             "chain_cascade.json", "chain_full.json", "lti_rotation.json",
                             "limit_cycle_gas.json"}) {
        CAPTURE(name);
        const Setup s = prepare(parse_scenario(read(name), std::nullopt).scenario);
        CHECK(s.report.ok());
    }
}
