// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "sdobs/analysis.hpp"
#include "sdobs/dde.hpp"
#include "sdobs/io.hpp"
#include "sdobs/observer.hpp"
#include "sdobs/plant.hpp"
#include "sdobs/predictor.hpp"
#include "sdobs/random.hpp"
#include "sdobs/saturation.hpp"
#include "sdobs/scenario.hpp"
#include "sdobs/simulation.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace sdobs;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Scenario load(const std::string& name) {
    return load_scenario(std::string(SDOBS_CONFIG_DIR) + "/" + name, std::nullopt).scenario;
}

SimTrace run(const Scenario& sc, Setup* out = nullptr) {
    Setup s = prepare(sc);
    enforce(s.report);
    SimTrace tr = simulate(sc, s);
    if (out) *out = std::move(s);
    return tr;
}

double sup(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

// Damped oscillator, no delay, observer only: the plant column is pure RK4.
Outcome integrator_oracle() {
    Mat F(2, 2);
    F << 0.0, 1.0, -4.0, -0.4;
    Mat H(1, 2);
    H << 1.0, 0.0;
    Vec x0(2);
    x0 << 1.0, -0.5;
    auto deviation = [&](double dt) {
        Scenario sc;
        sc.plant.kind = "lti";
        sc.plant.F = F;
        sc.plant.G = Mat::Zero(2, 1);
        sc.plant.H = H;
        sc.observer.present = true;
        sc.observer.P = Mat::Identity(2, 2);
        sc.observer.K = Mat::Zero(2, 1);
        sc.observer.q = 0.1;
        sc.observer.L = F.norm();
        sc.sampling.b = sc.sampling.B = 0.5;
        sc.mode = Mode::observer_only;
        sc.x0.kind = HistorySpec::Kind::constant;
        sc.x0.value = x0;
        sc.horizon = 10.0;
        sc.dt = dt;
        const SimTrace tr = simulate(sc, prepare(sc));
        double worst = 0.0;
        for (std::size_t j = 0; j < tr.size(); ++j) {
            const Vec exact = (F * tr.t[j]).exp() * x0;
            worst = std::max(worst, (tr.x[j] - exact).norm());
        }
        return worst;
    };
    const double fine = deviation(1e-3);
    const double coarse = deviation(0.04), half = deviation(0.02);
    const double ratio = coarse / half;
    return {fine < 1e-8 && ratio >= 12.0 && ratio <= 20.0,
            "max dev " + fmt("%.3g", fine) + " (< 1e-08), dt 0.04->0.02 ratio " +
                fmt("%.3f", ratio) + " (in [12, 20])"};
}

Outcome pipeline() {
    const Scenario sc = load("scalar_benchmark.json");
    Setup s;
    const SimTrace tr = run(sc, &s);
    const double rel = tr.e_pred.back() / tr.e_pred.front();
    const DecayFit fit = fit_decay_rate(tr, "e_pred", 5.0, 20.0);
    return {rel < 1e-4 && fit.rate >= 0.2 && !fit.degenerate,
            "e_pred(20)/e_pred(0) = " + fmt("%.3g", rel) + " (< 1e-4), rate " +
                fmt("%.3f", fit.rate) + " (>= 0.2), CBe^{sB} = " +
                fmt("%.4f", s.theory.small_gain)};
}

Outcome small_gain_sweep() {
    bool ok = true;
    std::string detail;
    for (double B : {0.1, 0.2, 0.3, 0.4}) {
        Scenario sc = load("scalar_benchmark.json");
        sc.sampling.b = sc.sampling.B = B;
        const SimTrace tr = run(sc);
        const double term = tr.e_pred.back();
        ok = ok && term < 1e-3;
        // Late values sit on the roundoff floor of |x| ~ e^t; t = 8 still separates the cells.
        const auto mid = static_cast<std::size_t>(
            std::lower_bound(tr.t.begin(), tr.t.end(), 8.0) - tr.t.begin());
        detail += "B=" + fmt("%.1f", B) + ": " + fmt("%.2e", term) + " (t=8: " +
                  fmt("%.1e", tr.e_pred[mid]) + ")  ";
    }
    return {ok, detail + "(terminal < 1e-3)"};
}

Outcome iss_gain() {
    std::vector<double> gains;
    double Gamma = NAN;
    for (double eps : {0.01, 0.02}) {
        Scenario sc = load("scalar_benchmark.json");
        sc.noise.kind = NoiseModel::Kind::constant;
        sc.noise.epsilon = eps;
        Setup s;
        const SimTrace tr = run(sc, &s);
        Gamma = s.theory.Gamma;
        gains.push_back(estimate_iss_gain(tr, eps, sc.tail_fraction));
    }
    const double spread = std::abs(gains[0] - gains[1]) / std::max(gains[0], gains[1]);
    return {gains[0] <= Gamma && gains[1] <= Gamma && spread <= 0.1,
            "gain " + fmt("%.4f", gains[0]) + " / " + fmt("%.4f", gains[1]) + " <= Gamma " +
                fmt("%.3f", Gamma) + ", spread " + fmt("%.2g", spread) + " (<= 0.1)"};
}

Scenario chain_predictor(int p, double r) {
    Scenario sc = load("chain_cascade.json");
    sc.predictor.p = p;
    sc.delay = r;
    sc.x0.kind = HistorySpec::Kind::trajectory;
    sc.x0.value = Vec::Zero(2);
    sc.x0.value << 0.5, 0.2;
    return sc;
}

Outcome lemma_predictor() {
    Scenario exact = chain_predictor(1, 0.5);
    exact.feed_offset = Vec();
    exact.predictor.xi_init = "matched";
    const double residual = sup(run(exact).e_pred);

    Scenario off = chain_predictor(1, 0.5);
    Setup s;
    const SimTrace tr = run(off, &s);
    const double amp = tail_sup(tr.t, tr.e_pred, 0.75 * off.horizon) / off.feed_offset.norm();
    const double beta = s.cascade->beta;
    return {residual < 1e-5 && amp <= beta * 1.05,
            "exact-feed residual " + fmt("%.3g", residual) + " (< 1e-05), amplification " +
                fmt("%.4f", amp) + " <= 1.05*beta = " + fmt("%.4f", 1.05 * beta)};
}

Outcome cascade_stages() {
    const Scenario sc = chain_predictor(4, 1.0);
    Setup s;
    const SimTrace tr = run(sc, &s);
    const double beta = s.cascade->beta;
    bool ok = true;
    std::string detail;
    for (int i = 1; i <= 4; ++i) {
        const double amp = tail_sup(tr.t, tr.stage_err[static_cast<std::size_t>(i - 1)],
                                    0.75 * sc.horizon) /
                           sc.feed_offset.norm();
        const double bound = std::pow(beta, i) * 1.05;
        ok = ok && amp <= bound;
        detail += "stage " + std::to_string(i) + ": " + fmt("%.4f", amp) + " <= " +
                  fmt("%.4f", bound) + "  ";
    }
    return {ok, detail};
}

Outcome gas_predictor() {
    Scenario exact = load("limit_cycle_gas.json");
    Setup s;
    const SimTrace tr = run(exact, &s);
    const DecayFit fit = fit_decay_rate(tr, "e_pred", 2.0, 12.0);
    const double sigma = s.sigma_pred;
    double sat = tr.diagnostics.saturation_worst_ratio;

    Scenario off = load("limit_cycle_gas.json");
    off.feed_offset = Vec::Zero(2);
    off.feed_offset << 0.01, -0.005;
    const SimTrace tro = run(off);
    sat = std::max(sat, tro.diagnostics.saturation_worst_ratio);
    const double gain = tail_sup(tro.t, tro.e_pred, 0.75 * off.horizon) / off.feed_offset.norm();
    const double beta = s.theory.beta;
    return {fit.rate >= sigma / 2.0 && gain <= 1.05 * beta && sat <= 1.0,
            "rate " + fmt("%.3f", fit.rate) + " (>= " + fmt("%.2f", sigma / 2) + "), offset gain " +
                fmt("%.4f", gain) + " <= " + fmt("%.4f", 1.05 * beta) + ", saturation ratio " +
                fmt("%.4f", sat) + " (<= 1)"};
}

Outcome schedule_robustness() {
    int converged = 0, identical = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Scenario sc = load("scalar_benchmark.json");
        sc.sampling.kind = ScheduleKind::jittered;
        sc.sampling.b = 0.05;
        sc.sampling.B = 0.3;
        sc.sampling.seed = sc.noise.seed = sc.seed = seed;
        const SimTrace a = run(sc);
        const SimTrace b = run(sc);
        worst = std::max(worst, a.e_pred.back());
        if (a.e_pred.back() < sc.converge_tol) ++converged;
        if (a.e_pred == b.e_pred && a.t == b.t && a.events.size() == b.events.size()) ++identical;
    }
    return {converged == 20 && identical == 20,
            std::to_string(converged) + "/20 converged (worst terminal " + fmt("%.2e", worst) +
                "), " + std::to_string(identical) + "/20 bit-identical reruns"};
}

// Random LTI data with stage histories built from smooth signals. The two
// right-hand sides get integrals that describe the same window.
Outcome cross_implementation() {
    Rng rng(2024);
    double worst = 0.0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        const int n = 2 + trial % 3, m = 1 + trial % 2, p = 1 + trial % 4;
        Mat F(n, n), G(n, m), H = Mat::Identity(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) F(i, j) = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) G(i, j) = rng.uniform(-1.0, 1.0);
        const Plant plant = make_lti(F, G, H);
        const double r = 0.4;
        const CascadeConfig cfg = validate_cascade(r, p, 2.0, 0.1, 1.0);
        const double dt = cfg.delta / 20.0;
        std::vector<Vec> levels;
        for (int k = 0; k < 3; ++k) {
            Vec v(m);
            for (int j = 0; j < m; ++j) v[j] = rng.uniform(-1.0, 1.0);
            levels.push_back(v);
        }
        const InputSignal u({-1.0, -0.17, 0.23}, levels);

        CascadeState state = make_cascade_state(cfg, n, 2 * dt);
        std::vector<Vec> amp, phase;
        for (int i = 0; i < p; ++i) {
            Vec a(n), ph(n);
            for (int j = 0; j < n; ++j) {
                a[j] = rng.uniform(-1.0, 1.0);
                ph[j] = rng.uniform(0.0, 3.0);
            }
            amp.push_back(a);
            phase.push_back(ph);
        }
        auto signal = [&](int i, double s) {
            Vec v(n);
            for (int j = 0; j < n; ++j) v[j] = amp[i][j] * std::sin(1.3 * s + phase[i][j]);
            return v;
        };
        const double t = 0.3;
        const long steps = 20;
        for (int i = 0; i < p; ++i)
            for (long k = steps; k >= 0; --k) {
                const double s = t - static_cast<double>(k) * dt;
                push_stage_node(state, i + 1, s, signal(i, s), Vec::Zero(n));
            }
        std::vector<Vec> xi, gen_int, lin_int;
        for (int i = 0; i < p; ++i) {
            xi.push_back(signal(i, t) + Vec::Constant(n, 0.01 * i));
            Vec li(n + m), gi(n);
            Vec int_xi = Vec::Zero(n);
            for (int j = 0; j < n; ++j)
                int_xi[j] = amp[i][j] / 1.3 *
                            (std::cos(1.3 * (t - cfg.delta) + phase[i][j]) -
                             std::cos(1.3 * t + phase[i][j]));
            const double shift = -cfg.r + (i + 1) * cfg.delta;
            const Vec int_u = u.integral(t - cfg.delta + shift, t + shift);
            li << int_xi, int_u;
            lin_int.push_back(li);
            gen_int.push_back(F * int_xi + G * int_u);
        }
        Vec z(n), zd(n);
        for (int j = 0; j < n; ++j) {
            z[j] = rng.uniform(-1.0, 1.0);
            zd[j] = rng.uniform(-1.0, 1.0);
        }
        const StageRates g = cascade_rhs(cfg, state, plant, xi, gen_int, z, zd, u, t);
        const StageRates l = lti_cascade_rhs(F, G, cfg, state, xi, lin_int, z, zd, u, t);
        for (int i = 0; i < p; ++i)
            worst = std::max(worst, (g.xi_dot[static_cast<std::size_t>(i)] -
                                     l.xi_dot[static_cast<std::size_t>(i)])
                                        .lpNorm<Eigen::Infinity>());
    }

    // Whole runs: the two forms on the same linear scenario.
    Scenario sc = load("lti_rotation.json");
    sc.horizon = 5.0;
    sc.stride = 1;
    const SimTrace lin = run(sc);
    sc.predictor.kind = PredictorKind::cascade;
    const SimTrace gen = run(sc);
    double run_dev = 0.0;
    for (std::size_t j = 0; j < lin.size(); ++j)
        run_dev = std::max(run_dev, (lin.xi_p[j] - gen.xi_p[j]).lpNorm<Eigen::Infinity>());
    return {worst < 1e-10 && run_dev < 1e-10,
            "rhs deviation " + fmt("%.3g", worst) + " over " + std::to_string(trials) +
                " random systems, trajectory deviation " + fmt("%.3g", run_dev) + " (< 1e-10)"};
}

Outcome property_suites() {
    std::vector<std::string> failed;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) failed.push_back(what);
    };

    // Hermite interpolation reproduces cubics and the node values.
    {
        auto c = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t * t; };
        auto dc = [](double t) { return -2.0 + 1.5 * t * t; };
        dde::HistoryBuffer buf(1, 1.0);
        for (int k = 0; k <= 10; ++k) {
            const double t = 0.1 * k;
            buf.push(t, Vec::Constant(1, c(t)), Vec::Constant(1, dc(t)));
        }
        double worst = 0.0;
        for (int k = 0; k <= 100; ++k) {
            const double t = 0.01 * k;
            worst = std::max(worst, std::abs(buf.interpolate(t)[0] - c(t)));
        }
        expect(worst < 1e-13, "interpolation exactness");
    }
    // Window quadrature integrates cubics exactly for even and odd interval counts.
    for (int intervals : {6, 7}) {
        dde::HistoryBuffer buf(1, 1.0);
        for (int k = 0; k <= intervals; ++k) {
            const double t = static_cast<double>(k) / intervals;
            buf.push(t, Vec::Constant(1, t), Vec::Constant(1, 1.0));
        }
        const Vec I = dde::integrate_window(
            buf, [](double s, const Vec&) { return Vec::Constant(1, s * s * s - s); }, 1.0, 1.0);
        expect(std::abs(I[0] - (0.25 - 0.5)) < 1e-13, "quadrature exactness");
    }
    // q is C¹ at s = 1.
    {
        const double h = 1e-7;
        expect(std::abs(saturation_q(1.0 + h) - saturation_q(1.0 - h)) < 1e-12 &&
                   std::abs(saturation_q_derivative(1.0 + h)) < 1e-6 &&
                   saturation_q_derivative(1.0 - h) == 0.0,
               "q C1 at 1");
    }
    // Sampled one-sided Lipschitz check: scalar benchmark passes, a destabilizing gain fails.
    {
        const Plant pl = make_scalar_linear(1.0);
        const auto good = ObserverGains::make(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, -3.0),
                                              Mat::Constant(1, 1, 1.0), 2.0, 1.0);
        const auto bad = ObserverGains::make(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, -1.0),
                                             Mat::Constant(1, 1, 1.0), 2.0, 1.0);
        expect(check_one_sided_lipschitz(good, pl, 5.0, 500, 1).pass, "one-sided check accepts benchmark");
        expect(!check_one_sided_lipschitz(bad, pl, 5.0, 500, 1).pass, "one-sided check rejects K = -1");
    }
    // Gain validators on documented examples.
    {
        const auto g = ObserverGains::make(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, -3.0),
                                           Mat::Constant(1, 1, 1.0), 2.0, 1.0);
        const ObserverConstants c = compute_constants(g);
        expect(std::abs(small_gain_product(c.C, c.sigma, 0.3) - 0.6074364634) < 1e-8,
               "small gain value");
        expect(small_gain_product(c.C, c.sigma, 0.5) > 1.0, "small gain rejects B = 0.5");
        expect(std::abs(c.B_star - 0.4325627555) < 1e-8, "B_star");
        expect(std::abs(validate_cascade(0.5, 1, 2.0, 1.0, 1.0).beta - 2.8467422494) < 1e-8,
               "beta p=1");
        bool rejected = false;
        try {
            validate_cascade(1.0, 1, 2.0, 0.1, 1.0);
        } catch (const GainConditionViolated&) {
            rejected = true;
        }
        expect(rejected, "Lr < p rejects r = 1, p = 1");
        expect(std::abs(validate_cascade(1.0, 4, 2.0, 0.1, 1.0).beta - 1.3389591133) < 1e-8,
               "beta p=4");
        rejected = false;
        try {
            beta_gas(1.0, 0.2, 6.0, 0.0);
        } catch (const GainConditionViolated&) {
            rejected = true;
        }
        expect(rejected, "GAS gain product rejects G1 = 6");
    }

    std::string detail = failed.empty() ? "all property checks hold" : "failed:";
    for (const auto& f : failed) detail += " [" + f + "]";
    return {failed.empty(), detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"integrator oracle", integrator_oracle},
        {"observer+predictor pipeline decay", pipeline},
        {"small-gain sweep over B", small_gain_sweep},
        {"ISS gain under constant noise", iss_gain},
        {"single-stage predictor", lemma_predictor},
        {"four-stage cascade amplification", cascade_stages},
        {"saturated predictor on the limit cycle", gas_predictor},
        {"jittered schedule robustness", schedule_robustness},
        {"linear vs general cascade", cross_implementation},
        {"property suites", property_suites},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("[%s] %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures == 0 ? 0 : 1;
}
