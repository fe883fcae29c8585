#include "sdobs/scenario.hpp"

#include "sdobs/dde.hpp"

#include <cmath>
#include <sstream>

namespace sdobs {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::full_pipeline:
            return "full_pipeline";
        case Mode::predictor_only:
            return "predictor_only";
        case Mode::observer_only:
            return "observer_only";
    }
    return "unknown";
}

std::string to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::none:
            return "none";
        case PredictorKind::cascade:
            return "cascade";
        case PredictorKind::lti:
            return "lti";
        case PredictorKind::gas:
            return "gas";
    }
    return "unknown";
}

bool ValidationReport::ok() const { return first_failure() == nullptr; }

const Check* ValidationReport::first_failure() const {
    for (const Check& c : checks)
        if (c.required && !c.pass) return &c;
    return nullptr;
}

Plant build_plant(const PlantSpec& spec, double r, std::optional<GasPlantData>* gas) {
    if (spec.kind == "scalar_linear") return make_scalar_linear(spec.a);
    if (spec.kind == "chain") return make_chain();
    if (spec.kind == "lti") {
        if (spec.F.size() == 0 || spec.H.size() == 0) throw ConfigError("lti plant needs F and H");
        Mat G = spec.G.size() ? spec.G : Mat::Zero(spec.F.rows(), 1);
        return make_lti(spec.F, G, spec.H);
    }
    if (spec.kind == "limit_cycle") {
        auto [plant, data] = make_gas_benchmark(spec.omega, r > 0.0 ? r : 0.2);
        if (gas) *gas = std::move(data);
        return plant;
    }
    throw ConfigError("unknown plant kind '" + spec.kind + "'");
}

namespace {

InputSignal build_input(const InputSpec& spec, int m) {
    if (spec.values.empty()) return InputSignal(Vec::Zero(m));
    for (const Vec& v : spec.values)
        if (v.size() != m) throw ConfigError("input values must have the plant input dimension");
    return InputSignal(spec.times, spec.values);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void add(ValidationReport& rep, std::string name, double value, double limit, bool pass,
         bool required, std::string detail = {}) {
    rep.checks.push_back(Check{std::move(name), value, limit, pass, required, std::move(detail)});
}

}  // namespace

Setup prepare(const Scenario& sc) {
    Setup s;
    const double r = sc.delay;
    if (!(r >= 0.0)) throw ConfigError("delay r must be nonnegative");
    if (!(sc.horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (!(sc.dt > 0.0)) throw ConfigError("dt must be positive");
    if (sc.stride < 1) throw ConfigError("output stride must be at least 1");

    std::optional<GasPlantData> gas;
    s.plant = build_plant(sc.plant, r, &gas);
    s.gas = std::move(gas);
    s.input = build_input(sc.input, s.plant.m);
    const int n = s.plant.n;

    const bool uses_observer = sc.mode != Mode::predictor_only;
    const bool uses_predictor =
        sc.mode != Mode::observer_only && sc.predictor.kind != PredictorKind::none;
    if (uses_observer && !sc.observer.present)
        throw ConfigError("mode " + to_string(sc.mode) + " requires an observer block");
    if (sc.mode == Mode::predictor_only && !uses_predictor)
        throw ConfigError("predictor_only mode requires a predictor");
    if (uses_predictor && !(r > 0.0)) throw ConfigError("predictors need a positive delay r");
    if (sc.predictor.kind == PredictorKind::lti && !s.plant.linear)
        throw ConfigError("the lti predictor requires a linear plant");
    if (sc.predictor.kind == PredictorKind::gas && !s.gas)
        throw ConfigError("the gas predictor requires the limit_cycle plant");
    if (sc.mode == Mode::predictor_only && sc.feed_offset.size() && sc.feed_offset.size() != n)
        throw ConfigError("feed_offset must have the state dimension");

    // Lipschitz constant.
    if (sc.observer.present && sc.observer.L) s.L = *sc.observer.L;
    else if (s.plant.lipschitz_L) s.L = *s.plant.lipschitz_L;
    else if (s.gas) s.L = estimate_lipschitz(s.plant, s.gas->S_tilde_radius, 4000, 11);

    if (s.plant.lipschitz_L) {
        const double est = estimate_lipschitz(s.plant, 5.0, 2000, 3);
        add(s.report, "sampled Lipschitz estimate <= declared L", est, *s.plant.lipschitz_L,
            est <= *s.plant.lipschitz_L * (1.0 + 1e-9), true);
    }

    // Observer.
    if (sc.observer.present) {
        if (!s.plant.H) throw ConfigError("the observer requires a linear output map");
        s.gains = ObserverGains::make(sc.observer.P, sc.observer.K, *s.plant.H, sc.observer.q, s.L);
        s.constants = compute_constants(*s.gains);
        if (uses_observer) {
            const bool lipschitz_plant = !s.gas;
            const OneSidedReport one_sided = check_one_sided_lipschitz(*s.gains, s.plant, 5.0, 2000, 5);
            add(s.report, "one-sided Lipschitz margin", one_sided.worst_margin, 0.0, one_sided.pass, lipschitz_plant,
                one_sided.lmi_max_eigenvalue ? "LMI max eigenvalue " + fmt(*one_sided.lmi_max_eigenvalue)
                                      : std::string{});
            s.theory.small_gain = small_gain_product(s.constants->C, s.constants->sigma, sc.sampling.B);
            add(s.report, "small gain C*B*exp(sigma*B)", s.theory.small_gain, 1.0,
                s.theory.small_gain < 1.0, lipschitz_plant,
                "B = " + fmt(sc.sampling.B) + ", B_star = " + fmt(s.constants->B_star));
        }
    }

    // Predictor.
    if (uses_predictor) {
        if (sc.predictor.sigma) s.sigma_pred = *sc.predictor.sigma;
        else if (s.constants) s.sigma_pred = s.constants->sigma;
        else throw ConfigError("predictor sigma is required when no observer is configured");
        const double mu = sc.predictor.mu;
        if (sc.predictor.kind == PredictorKind::gas) {
            s.delta = r;
            s.gas_predictor =
                make_gas_predictor_config(r, r, mu, s.sigma_pred, *s.gas, /*enforce=*/false);
            const auto& g = *s.gas_predictor;
            add(s.report, "G1*(exp(sigma*delta)-1)/sigma", g.gain_product, 1.0, g.gain_ok, true,
                "G1 = " + fmt(g.G1) + ", G2 = " + fmt(g.G2));
            add(s.report, "G1*r", g.G1 * r, 1.0, g.G1 * r < 1.0, true);
            add(s.report, "sigma/mu", s.sigma_pred / mu, 1.0, mu >= s.sigma_pred, true);
            s.theory.beta = s.theory.beta_p = g.beta;
        } else {
            const int p = sc.predictor.p;
            if (p < 1) throw ConfigError("predictor p must be a positive integer");
            if (!(s.L > 0.0)) throw ConfigError("cascade predictor needs a Lipschitz constant");
            s.delta = r / p;
            CascadeConfig c;
            try {
                c = validate_cascade(r, p, mu, s.sigma_pred, s.L);
            } catch (const GainConditionViolated&) {
                c.r = r;
                c.p = p;
                c.delta = s.delta;
                c.mu = mu;
                c.sigma = s.sigma_pred;
                c.L = s.L;
                c.gain_product = cascade_gain_product(s.sigma_pred, s.delta, s.L);
                c.L_delta = s.L * s.delta;
                c.L_delta_ok = c.L_delta < 1.0;
                c.beta = c.gain_product < 1.0 ? cascade_beta(s.sigma_pred, s.delta, s.L) : NAN;
            }
            s.cascade = c;
            add(s.report, "L*(exp(sigma*delta)-1)/sigma", c.gain_product, 1.0, c.gain_product < 1.0,
                true, "delta = " + fmt(c.delta));
            add(s.report, "sigma/mu", s.sigma_pred / mu, 1.0, mu > s.sigma_pred, true);
            add(s.report, "L*r/p", s.L * r / p, 1.0, s.L * r < p, true);
            s.theory.beta = c.beta;
            s.theory.beta_p = std::pow(c.beta, p);
        }
    }

    if (s.constants && uses_observer) {
        const double sg = s.theory.small_gain;
        const double gain_p = uses_predictor ? s.theory.beta_p : 1.0;
        s.theory.Gamma = sg < 1.0 ? s.constants->gamma * gain_p *
                                        std::exp(s.constants->sigma * sc.sampling.B) / (1.0 - sg)
                                  : INFINITY;
    }

    // Time grid.
    const double span = s.delta > 0.0 ? s.delta : r;
    s.dt = span > 0.0 ? dde::TimeGrid::aligned_step(span, sc.dt) : sc.dt;
    const bool aligned = (s.delta <= 0.0 || dde::TimeGrid::divides(s.dt, s.delta)) &&
                         (r <= 0.0 || dde::TimeGrid::divides(s.dt, r));
    add(s.report, "dt divides delta and r", s.dt, span, aligned, true);

    if (uses_observer) {
        s.schedule = generate_partition(sc.sampling.b, sc.sampling.B, sc.horizon, sc.sampling.kind,
                                        sc.sampling.seed);
    } else {
        s.schedule.times = {0.0};
    }
    return s;
}

void enforce(const ValidationReport& report) {
    const Check* c = report.first_failure();
    if (!c) return;
    if (c->name == "dt divides delta and r")
        throw ConfigError("time step does not divide the delay/predictor step");
    throw GainConditionViolated(c->name, c->value, c->limit);
}

}  // namespace sdobs
