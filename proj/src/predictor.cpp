#include "sdobs/predictor.hpp"

#include <algorithm>
#include <cmath>

namespace sdobs {

double cascade_gain_product(double sigma, double delta, double L) {
    return L * std::expm1(sigma * delta) / sigma;
}

double cascade_beta(double sigma, double delta, double L) {
    const double g = cascade_gain_product(sigma, delta, L);
    if (!(g < 1.0)) throw GainConditionViolated("L(exp(sigma*delta)-1)/sigma", g, 1.0);
    return sigma / (sigma - L * std::expm1(sigma * delta));
}

CascadeConfig validate_cascade(double r, int p, double mu, double sigma, double L) {
    if (!(r > 0.0) || p < 1 || !(mu > 0.0) || !(sigma > 0.0) || !(L > 0.0))
        throw ConfigError("cascade parameters r, p, mu, sigma, L must be positive");
    CascadeConfig c;
    c.r = r;
    c.p = p;
    c.delta = r / p;
    c.mu = mu;
    c.sigma = sigma;
    c.L = L;
    c.gain_product = cascade_gain_product(sigma, c.delta, L);
    c.L_delta = L * c.delta;
    c.L_delta_ok = c.L_delta < 1.0;
    c.beta = cascade_beta(sigma, c.delta, L);
    if (!(mu > sigma)) throw GainConditionViolated("sigma/mu", sigma / mu, 1.0);
    return c;
}

CascadeState make_cascade_state(const CascadeConfig& cfg, int n, double slack) {
    CascadeState s;
    for (int i = 0; i < cfg.p; ++i) {
        s.stages.emplace_back(n, cfg.delta, slack);
        s.integrands.emplace_back(n, cfg.delta, slack);
        s.stage_derivatives.push_back(Vec::Zero(n));
    }
    return s;
}

Vec stage_integrand(const CascadeConfig& cfg, const Plant& plant, const InputSignal& u, int stage,
                    double s, const Vec& xi) {
    return plant.f(xi, u(s - cfg.r + stage * cfg.delta));
}

namespace {

// Only node values of the cache are ever read; the slope is a divided difference.
void push_cached(dde::HistoryBuffer& cache, double t, Vec g, Vec g_left = Vec()) {
    const Vec& arrive = g_left.size() ? g_left : g;
    Vec g_dot = cache.empty() ? Vec::Zero(g.size())
                              : Vec((arrive - cache.back().value) / (t - cache.back().t));
    cache.push(t, std::move(g), g_dot, Vec(), std::move(g_left));
    cache.trim();
}

}  // namespace

void push_integrand_node(CascadeState& state, const CascadeConfig& cfg, const Plant& plant,
                         const InputSignal& u, int stage, double t, const Vec& xi) {
    auto& cache = state.integrands[static_cast<std::size_t>(stage - 1)];
    const double s = t - cfg.r + stage * cfg.delta;
    Vec before, after;
    if (u.jump_near(s, 1e-9 * cfg.delta, before, after)) {
        push_cached(cache, t, plant.f(xi, after), plant.f(xi, before));
        return;
    }
    push_cached(cache, t, stage_integrand(cfg, plant, u, stage, t, xi));
}

void push_lti_integrand_node(CascadeState& state, int stage, double t, const Vec& xi) {
    push_cached(state.integrands[static_cast<std::size_t>(stage - 1)], t, xi);
}

void push_stage_node(CascadeState& state, int stage, double t, const Vec& xi, const Vec& xi_dot,
                     const Vec& xi_dot_left) {
    const auto i = static_cast<std::size_t>(stage - 1);
    state.stages[i].push(t, xi, xi_dot, xi_dot_left);
    state.stages[i].trim();
    state.stage_derivatives[i] = xi_dot;
}

Vec stage_integral(const CascadeConfig& cfg, const CascadeState& state, int stage, double t) {
    return dde::integrate_window(state.integrands[static_cast<std::size_t>(stage - 1)], t,
                                 cfg.delta);
}

StageRates cascade_rhs(const CascadeConfig& cfg, const CascadeState& state, const Plant& plant,
                       std::span<const Vec> xi, std::span<const Vec> integrals, const Vec& z,
                       const Vec& z_dot, const InputSignal& u, double t) {
    const auto p = static_cast<std::size_t>(cfg.p);
    if (xi.size() != p || integrals.size() != p) throw ConfigError("cascade stage count mismatch");
    StageRates out;
    out.xi_dot.reserve(p);
    out.integral_dot.reserve(p);
    for (std::size_t i = 0; i < p; ++i) {
        const int stage = static_cast<int>(i) + 1;
        const Vec lagged = state.stages[i].interpolate(t - cfg.delta);
        const Vec g_now = plant.f(xi[i], u(t - cfg.r + stage * cfg.delta));
        const Vec g_lag = plant.f(lagged, u(t - cfg.r + (stage - 1) * cfg.delta));
        const Vec& prev = i == 0 ? z : xi[i - 1];
        const Vec& prev_dot = i == 0 ? z_dot : out.xi_dot[i - 1];
        Vec g_diff = g_now - g_lag;
        out.xi_dot.push_back(g_diff + prev_dot - cfg.mu * (xi[i] - prev - integrals[i]));
        out.integral_dot.push_back(std::move(g_diff));
    }
    return out;
}

StageRates lti_cascade_rhs(const Mat& F, const Mat& G, const CascadeConfig& cfg,
                           const CascadeState& state, std::span<const Vec> xi,
                           std::span<const Vec> integrals, const Vec& z, const Vec& z_dot,
                           const InputSignal& u, double t) {
    const auto p = static_cast<std::size_t>(cfg.p);
    if (xi.size() != p || integrals.size() != p) throw ConfigError("cascade stage count mismatch");
    const auto n = F.rows();
    const auto m = G.cols();
    StageRates out;
    for (std::size_t i = 0; i < p; ++i) {
        const int stage = static_cast<int>(i) + 1;
        if (integrals[i].size() != n + m) throw ConfigError("linear stage integral size mismatch");
        const Vec lagged = state.stages[i].interpolate(t - cfg.delta);
        const Vec u_now = u(t - cfg.r + stage * cfg.delta);
        const Vec u_lag = u(t - cfg.r + (stage - 1) * cfg.delta);
        const auto int_xi = integrals[i].head(n);
        const auto int_u = integrals[i].tail(m);
        const Vec& prev = i == 0 ? z : xi[i - 1];
        const Vec& prev_dot = i == 0 ? z_dot : out.xi_dot[i - 1];
        out.xi_dot.push_back(F * (xi[i] - lagged + cfg.mu * int_xi) + prev_dot -
                             cfg.mu * (xi[i] - prev) + G * (u_now - u_lag + cfg.mu * int_u));
        Vec rate(n + m);
        rate << xi[i] - lagged, u_now - u_lag;
        out.integral_dot.push_back(std::move(rate));
    }
    return out;
}

Vec lti_stage_integral(const CascadeConfig& cfg, const CascadeState& state, int stage, double t,
                       const InputSignal& u) {
    const Vec int_xi =
        dde::integrate_window(state.integrands[static_cast<std::size_t>(stage - 1)], t, cfg.delta);
    const double shift = -cfg.r + stage * cfg.delta;
    const Vec int_u = u.integral(t - cfg.delta + shift, t + shift);
    Vec out(int_xi.size() + int_u.size());
    out << int_xi, int_u;
    return out;
}

AprioriBound::AprioriBound(const CascadeConfig& cfg, double initial_sup)
    : rate_(cfg.mu * cfg.L * cfg.delta + cfg.mu + 2.0 * cfg.L),
      initial_sup_(initial_sup),
      mu_delta_plus_two_(cfg.mu * cfg.delta + 2.0) {}

double AprioriBound::update(double t, double observed_sup, double forcing, double zero_field) {
    forcing_sup_ = std::max(forcing_sup_, forcing);
    zero_field_sup_ = std::max(zero_field_sup_, zero_field);
    const double bound =
        std::exp(rate_ * t) *
        (initial_sup_ + (forcing_sup_ + mu_delta_plus_two_ * zero_field_sup_) / rate_);
    const double ratio = std::isfinite(bound) && bound > 0.0 ? observed_sup / bound : 0.0;
    worst_ = std::max(worst_, ratio);
    return ratio;
}

double beta_gas(double sigma, double delta, double G1, double G2) {
    const double e = std::expm1(sigma * delta);
    const double g = G1 * e / sigma;
    if (!(g < 1.0)) throw GainConditionViolated("G1(exp(sigma*delta)-1)/sigma", g, 1.0);
    return (sigma + G2 * e) / (sigma - G1 * e);
}

GasPredictorConfig make_gas_predictor_config(double r, double delta, double mu, double sigma,
                                             const GasPlantData& gas, bool enforce) {
    if (!(r > 0.0) || !(delta > 0.0) || !(mu > 0.0) || !(sigma > 0.0))
        throw ConfigError("GAS predictor parameters r, delta, mu, sigma must be positive");
    if (!gas.q_fn) throw ConfigError("GAS plant data lacks a saturation function");
    GasPredictorConfig c;
    c.r = r;
    c.delta = delta;
    c.mu = mu;
    c.sigma = sigma;
    c.K_sat = gas.K_sat;
    c.q_fn = gas.q_fn;
    c.G1 = gas.G1;
    c.G2 = gas.G2;
    c.gain_product = gas.G1 * std::expm1(sigma * delta) / sigma;
    c.gain_ok = c.gain_product < 1.0;
    if (c.gain_ok) c.beta = beta_gas(sigma, delta, gas.G1, gas.G2);
    if (enforce) {
        if (!c.gain_ok)
            throw GainConditionViolated("G1(exp(sigma*delta)-1)/sigma", c.gain_product, 1.0);
        if (mu < sigma) throw GainConditionViolated("sigma/mu", sigma / mu, 1.0);
    }
    return c;
}

Vec gas_integrand(const GasPredictorConfig& cfg, const Plant& plant, const InputSignal& u,
                  double s, const Vec& xi, double psi) {
    return plant.f(cfg.q_fn(xi.norm() / psi) * xi, u(s - cfg.r + cfg.delta));
}

namespace {

double checked_psi(const GasPlantData& gas, const Vec& z) {
    const double psi = gas.psi(z);
    if (!(psi > 0.0)) throw ConfigError("psi(z) must be positive");
    return psi;
}

}  // namespace

Vec gas_initial_mismatch(const GasPredictorConfig& cfg, const GasPlantData& gas,
                         const Plant& plant, const dde::HistoryBuffer& xi_history, const Vec& z0,
                         const InputSignal& u) {
    const double psi = checked_psi(gas, z0);
    const Vec integral = dde::integrate_window(
        xi_history, [&](double s, const Vec& xi) { return gas_integrand(cfg, plant, u, s, xi, psi); },
        0.0, cfg.delta);
    return xi_history.interpolate(0.0) - z0 - integral;
}

GasUpdate gas_predictor_update(const GasPredictorConfig& cfg, const GasPlantData& gas,
                               const Plant& plant, dde::HistoryBuffer& xi_history, const Vec& z,
                               double t, const InputSignal& u) {
    if (cfg.E0.size() != z.size()) throw ConfigError("GAS predictor initial mismatch not set");
    if (xi_history.empty()) throw WindowUnderflow(t - cfg.delta, NAN, NAN);
    const dde::Node last = xi_history.back();
    if (!(t > last.t)) throw ConfigError("GAS predictor update must advance in time");

    const double psi = checked_psi(gas, z);
    const dde::WindowSamples win = dde::gather_window(xi_history, t - cfg.delta, last.t);

    // Abscissae: stored window, then the new endpoint t.
    std::vector<double> s = win.s;
    s.push_back(t);
    const std::vector<double> w = dde::window_weights(s);

    Vec known = Vec::Zero(z.size());
    GasUpdate out;
    auto track = [&](const Vec& xi) {
        const double mag = xi.norm();
        out.saturation_ratio =
            std::max(out.saturation_ratio, cfg.q_fn(mag / psi) * mag / (cfg.K_sat * psi));
    };
    for (std::size_t j = 0; j < win.s.size(); ++j) {
        known += w[j] * gas_integrand(cfg, plant, u, win.s[j], win.values[j], psi);
        track(win.values[j]);
    }
    known += z + std::exp(-cfg.mu * t) * cfg.E0;

    const double w_end = w.back();
    Vec xi = last.value + (t - last.t) * last.derivative;
    for (out.iterations = 1; out.iterations <= 50; ++out.iterations) {
        Vec next = known + w_end * gas_integrand(cfg, plant, u, t, xi, psi);
        const double change = (next - xi).norm();
        xi = std::move(next);
        if (change <= 1e-15 * (1.0 + xi.norm())) break;
    }
    if (!xi.allFinite()) throw IntegrationDiverged(t, "xi");
    track(xi);

    Vec slope = (xi - last.value) / (t - last.t);
    xi_history.push(t, xi, std::move(slope));
    xi_history.trim();
    out.xi = std::move(xi);
    return out;
}

}  // namespace sdobs
