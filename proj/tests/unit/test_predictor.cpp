#include "sdobs/predictor.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace sdobs;
using doctest::Approx;

namespace {

Plant zero_plant(int n) { return make_lti(Mat::Zero(n, n), Mat::Zero(n, 1), Mat::Identity(n, n)); }

// Stage histories held at the given constants over [-delta, 0].
CascadeState constant_state(const CascadeConfig& cfg, const std::vector<Vec>& values) {
    CascadeState st = make_cascade_state(cfg, static_cast<int>(values.front().size()), 0.02);
    for (int i = 0; i < cfg.p; ++i)
        for (int k = 10; k >= 0; --k)
            push_stage_node(st, i + 1, -cfg.delta * k / 10.0, values[static_cast<std::size_t>(i)],
                            Vec::Zero(values.front().size()));
    return st;
}

}  // namespace

TEST_CASE("cascade gain conditions") {
    const CascadeConfig c = validate_cascade(1.0, 4, 2.0, 0.1, 1.0);
    CHECK(c.delta == Approx(0.25));
    CHECK(c.gain_product == Approx(std::expm1(0.025) / 0.1));
    CHECK(c.beta == Approx(1.3389591133).epsilon(1e-9));

    CHECK_THROWS_AS(validate_cascade(1.0, 1, 2.0, 0.1, 1.0), GainConditionViolated);
    CHECK_THROWS_AS(validate_cascade(0.5, 1, 0.05, 0.1, 1.0), GainConditionViolated);
    CHECK_THROWS_AS(validate_cascade(-1.0, 1, 2.0, 0.1, 1.0), ConfigError);
    CHECK(validate_cascade(0.5, 1, 2.0, 1.0, 1.0).beta == Approx(2.8467422494).epsilon(1e-9));
}

TEST_CASE("beta shrinks as the cascade gets finer") {
    const double b4 = validate_cascade(1.0, 4, 2.0, 0.1, 1.0).beta;
    const double b64 = validate_cascade(1.0, 64, 2.0, 0.1, 1.0).beta;
    CHECK(b64 < b4);
    CHECK(b64 > 1.0);
}

TEST_CASE("cascade rhs: fixed point of a zero field") {
    const CascadeConfig cfg = validate_cascade(0.5, 1, 2.0, 0.1, 1.0);
    const Vec c = Vec::Constant(2, 0.7);
    CascadeState st = constant_state(cfg, {c});
    const Plant plant = zero_plant(2);
    const std::vector<Vec> xi{c}, integrals{Vec::Zero(2)};
    const StageRates r = cascade_rhs(cfg, st, plant, xi, integrals, c, Vec::Zero(2), InputSignal(Vec::Zero(1)), 0.0);
    CHECK(r.xi_dot[0].norm() == 0.0);
}

TEST_CASE("cascade rhs: second stage relaxes at rate mu") {
    const CascadeConfig cfg = validate_cascade(0.5, 2, 2.0, 0.1, 1.0);
    const Vec c = Vec::Constant(1, 0.3);
    const Vec c1 = Vec::Constant(1, 1.3);
    CascadeState st = constant_state(cfg, {c, c1});
    const std::vector<Vec> xi{c, c1}, integrals{Vec::Zero(1), Vec::Zero(1)};
    const StageRates r =
        cascade_rhs(cfg, st, zero_plant(1), xi, integrals, c, Vec::Zero(1), InputSignal(Vec::Zero(1)), 0.0);
    CHECK(r.xi_dot[0][0] == 0.0);
    CHECK(r.xi_dot[1][0] == Approx(-2.0));
}

TEST_CASE("linear form collapses to the relaxation chain when F = G = 0") {
    const CascadeConfig cfg = validate_cascade(0.6, 3, 2.0, 0.1, 1.0);
    std::vector<Vec> vals{Vec::Constant(1, 0.1), Vec::Constant(1, -0.4), Vec::Constant(1, 2.0)};
    CascadeState st = constant_state(cfg, vals);
    std::vector<Vec> integrals(3, Vec::Zero(2));
    const Vec z = Vec::Constant(1, 0.5), zd = Vec::Constant(1, 0.25);
    const StageRates r = lti_cascade_rhs(Mat::Zero(1, 1), Mat::Zero(1, 1), cfg, st, vals, integrals, z,
                                         zd, InputSignal(Vec::Zero(1)), 0.0);
    double prev_dot = zd[0], prev = z[0];
    for (int i = 0; i < 3; ++i) {
        const double expected = prev_dot - 2.0 * (vals[i][0] - prev);
        CHECK(r.xi_dot[i][0] == Approx(expected));
        prev_dot = expected;
        prev = vals[i][0];
    }
}

TEST_CASE("integrand cache splits at input switches") {
    const CascadeConfig cfg = validate_cascade(0.5, 1, 2.0, 0.1, 1.0);
    const Plant plant = make_scalar_linear(0.0);  // f = u
    const InputSignal u({0.0, 0.25}, {Vec::Constant(1, 1.0), Vec::Constant(1, 3.0)});
    CascadeState st = make_cascade_state(cfg, 1, 0.02);
    for (int k = 0; k <= 50; ++k) push_integrand_node(st, cfg, plant, u, 1, 0.01 * k, Vec::Zero(1));
    // ∫_0^0.5 u = 0.25 + 0.75.
    CHECK(stage_integral(cfg, st, 1, 0.5)[0] == Approx(1.0).epsilon(1e-13));
}

TEST_CASE("a-priori bound is finite and grows") {
    const CascadeConfig cfg = validate_cascade(0.5, 1, 2.0, 0.1, 1.0);
    AprioriBound bound(cfg, 1.0);
    CHECK(bound.update(0.0, 1.0, 0.0, 0.0) == Approx(1.0));
    CHECK(bound.update(1.0, 1.0, 0.0, 0.0) < 1.0);
    CHECK(bound.worst_ratio() == Approx(1.0));
}

TEST_CASE("GAS predictor gains") {
    CHECK(beta_gas(1.0, 0.2, 1.0, 0.5) ==
          Approx((1.0 + 0.5 * std::expm1(0.2)) / (1.0 - std::expm1(0.2))));
    CHECK_THROWS_AS(beta_gas(1.0, 0.2, 6.0, 0.0), GainConditionViolated);

    auto [plant, gas] = make_gas_benchmark(1.0, 0.2);
    const GasPredictorConfig cfg = make_gas_predictor_config(0.2, 0.2, 2.0, 1.0, gas);
    CHECK(cfg.gain_ok);
    CHECK(cfg.gain_product < 1.0);
    CHECK(cfg.beta > 1.0);
    CHECK_THROWS_AS(make_gas_predictor_config(0.2, 0.2, 0.5, 1.0, gas), GainConditionViolated);
    CHECK_NOTHROW(make_gas_predictor_config(0.2, 0.2, 0.5, 1.0, gas, false));
}

TEST_CASE("GAS predictor follows its input when the plant is idle at the origin") {
    auto [plant, gas] = make_gas_benchmark(1.0, 0.2);
    GasPredictorConfig cfg = make_gas_predictor_config(0.2, 0.2, 2.0, 1.0, gas);
    const InputSignal u(Vec::Zero(1));
    dde::HistoryBuffer hist(2, 0.2, 0.01);
    const Vec origin = Vec::Zero(2);
    for (int k = 200; k >= 0; --k) hist.push(-1e-3 * k, origin, origin);
    cfg.E0 = gas_initial_mismatch(cfg, gas, plant, hist, origin, u);
    CHECK(cfg.E0.norm() == 0.0);
    GasUpdate last;
    for (int k = 1; k <= 100; ++k) last = gas_predictor_update(cfg, gas, plant, hist, origin, 1e-3 * k, u);
    CHECK(last.xi.norm() < 1e-14);
    CHECK(last.saturation_ratio <= 1.0);
}
