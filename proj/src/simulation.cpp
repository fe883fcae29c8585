#include "sdobs/simulation.hpp"

#include "sdobs/dde.hpp"

#include <algorithm>
#include <cmath>

namespace sdobs {

namespace {

/// x0 on [−span, 0] with its derivative.
class InitialHistory {
   public:
    InitialHistory(const HistorySpec& spec, const Plant& plant, const InputSignal& u, double span,
                   double dt)
        : spec_(spec) {
        const int n = plant.n;
        if (spec.kind == HistorySpec::Kind::table) {
            if (spec.times.empty() || spec.times.size() != spec.values.size())
                throw ConfigError("table initial history needs matching times and values");
            if (!std::is_sorted(spec.times.begin(), spec.times.end()))
                throw ConfigError("table initial history times must be sorted");
            for (const Vec& v : spec.values)
                if (v.size() != n) throw ConfigError("initial history values must have size n");
            return;
        }
        if (spec.value.size() != n) throw ConfigError("initial state must have size n");
        if (spec.kind == HistorySpec::Kind::sinusoid && spec.amplitude.size() != n)
            throw ConfigError("sinusoid initial history amplitude must have size n");
        if (spec.kind == HistorySpec::Kind::trajectory) {
            // Backward integration of the plant from x(0): y(s) = x(−s).
            const long steps = static_cast<long>(std::ceil(span / dt - 1e-9)) + 2;
            const dde::Rhs back = [&plant, &u](double s, const Vec& y) -> Vec {
                return -plant.f(y, u(-s));
            };
            std::vector<Vec> values{spec.value};
            for (long j = 0; j < steps; ++j)
                values.push_back(dde::rk4_step(values.back(), back, static_cast<double>(j) * dt, dt));
            trajectory_ = dde::HistoryBuffer(n, static_cast<double>(steps + 1) * dt);
            for (long j = steps; j >= 0; --j) {
                const double theta = -static_cast<double>(j) * dt;
                const Vec& v = values[static_cast<std::size_t>(j)];
                trajectory_.push(theta, v, plant.f(v, u(theta)));
            }
        }
    }

    Vec value(double theta) const {
        switch (spec_.kind) {
            case HistorySpec::Kind::constant:
                return spec_.value;
            case HistorySpec::Kind::sinusoid:
                return spec_.value +
                       spec_.amplitude * std::sin(spec_.omega * theta + spec_.phase);
            case HistorySpec::Kind::table: {
                const auto& ts = spec_.times;
                if (theta <= ts.front()) return spec_.values.front();
                if (theta >= ts.back()) return spec_.values.back();
                const auto j = static_cast<std::size_t>(
                    std::upper_bound(ts.begin(), ts.end(), theta) - ts.begin());
                const double a = (theta - ts[j - 1]) / (ts[j] - ts[j - 1]);
                return (1.0 - a) * spec_.values[j - 1] + a * spec_.values[j];
            }
            case HistorySpec::Kind::trajectory:
                return trajectory_.interpolate(theta);
        }
        return spec_.value;
    }

    Vec derivative(double theta) const {
        switch (spec_.kind) {
            case HistorySpec::Kind::constant:
                return Vec::Zero(spec_.value.size());
            case HistorySpec::Kind::sinusoid:
                return spec_.amplitude *
                       (spec_.omega * std::cos(spec_.omega * theta + spec_.phase));
            case HistorySpec::Kind::table: {
                const auto& ts = spec_.times;
                if (theta < ts.front() || theta >= ts.back() || ts.size() < 2)
                    return Vec::Zero(spec_.values.front().size());
                const auto j = static_cast<std::size_t>(
                    std::upper_bound(ts.begin(), ts.end(), theta) - ts.begin());
                return (spec_.values[j] - spec_.values[j - 1]) / (ts[j] - ts[j - 1]);
            }
            case HistorySpec::Kind::trajectory:
                return trajectory_.derivative_at(theta);
        }
        return Vec::Zero(spec_.value.size());
    }

   private:
    HistorySpec spec_;
    dde::HistoryBuffer trajectory_;
};

class Simulator {
   public:
    Simulator(const Scenario& sc, const Setup& st)
        : sc_(sc),
          st_(st),
          plant_(st.plant),
          u_(st.input),
          u_left_(st.input.left_continuous()),
          n_(st.plant.n),
          r_(sc.delay),
          dt_(st.dt),
          observer_(sc.mode != Mode::predictor_only),
          x0_(sc.x0, st.plant, st.input, std::max(sc.delay, st.delta), st.dt) {
        if (st_.cascade) {
            cascade_ = *st_.cascade;
            p_ = cascade_.p;
            linear_form_ = sc.predictor.kind == PredictorKind::lti;
        }
        if (st_.gas_predictor) gas_cfg_ = *st_.gas_predictor;
        d_ = sc.feed_offset.size() ? sc.feed_offset : Vec::Zero(n_);
        layout();
        initialize();
    }

    SimTrace run() {
        on_node(0.0);
        std::vector<double> events;
        for (double tau : st_.schedule.times)
            if (tau > 0.0) events.push_back(tau);
        const dde::TimeGrid grid(0.0, dt_, std::move(events));
        dde::advance_with_events(
            grid, [this](double t, double h) { step(t, h); },
            [this](double tau) { on_event(tau); }, sc_.horizon,
            [this](double t) { on_node(t); });
        if (trace_.t.empty() || trace_.t.back() != last_node_t_) record(last_node_t_);
        if (apriori_) trace_.diagnostics.apriori_worst_ratio = apriori_->worst_ratio();
        return std::move(trace_);
    }

   private:
    void layout() {
        Eigen::Index off = n_;
        if (observer_) {
            oz_ = off;
            ow_ = off + n_;
            off += n_ + plant_.k;
        }
        int_size_ = linear_form_ ? n_ + plant_.m : n_;
        os_ = off;
        off += static_cast<Eigen::Index>(p_) * (n_ + int_size_);
        Y_ = Vec::Zero(off);
    }

    Eigen::Index xi_off(int i) const { return os_ + i * (n_ + int_size_); }
    Eigen::Index int_off(int i) const { return xi_off(i) + n_; }

    /// x at any θ ≤ current time. `x_now` is the state at the current time `t_now`.
    Vec x_at(double theta, double t_now, const Vec& x_now) const {
        if (theta < 0.0) return x0_.value(theta);
        const double tol = 1e-9 * dt_;
        if (theta <= x_hist_.back_time() + tol) return x_hist_.interpolate(theta);
        if (theta >= t_now - tol) return x_now;
        const dde::Node& a = x_hist_.back();
        const dde::Node b{t_now, x_now, plant_.f(x_now, u_left_(t_now)), Vec(), Vec()};
        return dde::hermite(a, b, theta);
    }

    /// z and ż fed to the predictor.
    void feed(double t, const Vec& Y, const Vec* dY, Vec& z, Vec& z_dot) const {
        feed(t, Y, dY, z, z_dot, u_);
    }

    void feed(double t, const Vec& Y, const Vec* dY, Vec& z, Vec& z_dot,
              const InputSignal& u) const {
        if (observer_) {
            z = Y.segment(oz_, n_);
            z_dot = dY ? Vec(dY->segment(oz_, n_)) : observer_slope(t, Y, u);
            return;
        }
        const double theta = t - r_;
        const Vec xd = x_at(theta, t, Y.head(n_));
        z = xd + d_;
        z_dot = theta >= 0.0 ? plant_.f(xd, u(theta)) : x0_.derivative(theta);
    }

    Vec observer_slope(double t, const Vec& Y, const InputSignal& u) const {
        const Vec z = Y.segment(oz_, n_);
        const Vec w = Y.segment(ow_, plant_.k);
        const Vec ud = u(t - r_);
        return sc_.observer.saturation_radius > 0.0
                   ? saturated_observer_rhs(*st_.gains, plant_, z, w, ud,
                                            sc_.observer.saturation_radius)
                   : observer_rhs(*st_.gains, plant_, z, w, ud);
    }

    Vec rhs(double t, const Vec& Y) const { return rhs(t, Y, u_); }

    Vec rhs(double t, const Vec& Y, const InputSignal& u) const {
        Vec dY(Y.size());
        const Vec x = Y.head(n_);
        dY.head(n_) = plant_.f(x, u(t));
        if (observer_) {
            const Vec z = Y.segment(oz_, n_);
            dY.segment(oz_, n_) = observer_slope(t, Y, u);
            dY.segment(ow_, plant_.k) = w_rhs(plant_, z, u(t - r_));
        }
        if (p_ > 0) {
            Vec z, z_dot;
            feed(t, Y, observer_ ? &dY : nullptr, z, z_dot, u);
            std::vector<Vec> xi, integrals;
            for (int i = 0; i < p_; ++i) {
                xi.push_back(Y.segment(xi_off(i), n_));
                integrals.push_back(Y.segment(int_off(i), int_size_));
            }
            const StageRates rates =
                linear_form_ ? lti_cascade_rhs(plant_.linear->F, plant_.linear->G, cascade_,
                                               state_, xi, integrals, z, z_dot, u, t)
                             : cascade_rhs(cascade_, state_, plant_, xi, integrals, z, z_dot,
                                           u, t);
            for (int i = 0; i < p_; ++i) {
                dY.segment(xi_off(i), n_) = rates.xi_dot[static_cast<std::size_t>(i)];
                dY.segment(int_off(i), int_size_) = rates.integral_dot[static_cast<std::size_t>(i)];
            }
        }
        return dY;
    }

    std::string channel_of(const Vec& Y) const {
        auto bad = [&](Eigen::Index off, Eigen::Index len) { return !Y.segment(off, len).allFinite(); };
        if (bad(0, n_)) return "x";
        if (observer_ && bad(oz_, n_)) return "z";
        if (observer_ && bad(ow_, plant_.k)) return "w";
        for (int i = 0; i < p_; ++i) {
            if (bad(xi_off(i), n_)) return "xi_" + std::to_string(i + 1);
            if (bad(int_off(i), int_size_)) return "integral_" + std::to_string(i + 1);
        }
        return "state";
    }

    void push_integrand(int stage, double t, const Vec& xi) {
        if (linear_form_) push_lti_integrand_node(state_, stage, t, xi);
        else push_integrand_node(state_, cascade_, plant_, u_, stage, t, xi);
    }

    Vec stage_integral_now(int stage, double t) const {
        return linear_form_ ? lti_stage_integral(cascade_, state_, stage, t, u_)
                            : stage_integral(cascade_, state_, stage, t);
    }

    Vec initial_stage_value(int stage, double theta, double shift, const Vec& z0) const {
        const std::string& how = sc_.predictor.xi_init;
        if (how == "matched") return x0_.value(theta + shift);
        if (how == "constant") return sc_.predictor.xi_constant.at(static_cast<std::size_t>(stage - 1));
        return z0;
    }

    Vec initial_stage_slope(double theta, double shift) const {
        if (sc_.predictor.xi_init == "matched") return x0_.derivative(theta + shift);
        return Vec::Zero(n_);
    }

    void initialize() {
        const double slack = 2.0 * dt_;
        const Vec x0 = x0_.value(0.0);
        Y_.head(n_) = x0;

        x_hist_ = dde::HistoryBuffer(n_, std::max(r_, st_.delta), slack);
        const long hist_nodes = std::lround(std::max(r_, st_.delta) / dt_);
        for (long j = hist_nodes; j >= 1; --j) {
            const double theta = -static_cast<double>(j) * dt_;
            x_hist_.push(theta, x0_.value(theta), x0_.derivative(theta));
        }
        x_hist_.push(0.0, x0, plant_.f(x0, u_(0.0)), hist_nodes > 0 ? x0_.derivative(0.0) : Vec());

        Vec z0;
        if (observer_) {
            z0 = sc_.z0 ? *sc_.z0 : Vec::Zero(n_);
            if (z0.size() != n_) throw ConfigError("z0 must have size n");
            Vec w0 = sc_.w0 ? *sc_.w0 : plant_.h(z0);
            if (w0.size() != plant_.k) throw ConfigError("w0 must have size k");
            Y_.segment(oz_, n_) = z0;
            Y_.segment(ow_, plant_.k) = w0;
        } else {
            z0 = x0_.value(-r_) + d_;
        }

        const std::string& how = sc_.predictor.xi_init;
        if (how != "z0" && how != "matched" && how != "constant")
            throw ConfigError("xi_init must be z0, matched or constant");
        if (how == "constant") {
            const std::size_t stages = st_.gas_predictor ? 1 : static_cast<std::size_t>(p_);
            if (sc_.predictor.xi_constant.size() != stages)
                throw ConfigError("xi_init constant needs one vector per stage");
            for (const Vec& v : sc_.predictor.xi_constant)
                if (v.size() != n_) throw ConfigError("xi constants must have size n");
        }

        if (p_ > 0) {
            state_ = make_cascade_state(cascade_, n_, slack);
            const long m = std::lround(cascade_.delta / dt_);
            double sup0 = 0.0;
            for (int i = 1; i <= p_; ++i) {
                const double shift = -r_ + i * cascade_.delta;
                for (long j = m; j >= 0; --j) {
                    const double theta = -static_cast<double>(j) * dt_;
                    const Vec v = initial_stage_value(i, theta, shift, z0);
                    if (i == 1) sup0 = std::max(sup0, v.norm());
                    push_integrand(i, theta, v);
                    push_stage_node(state_, i, theta, v, initial_stage_slope(theta, shift));
                }
                Y_.segment(xi_off(i - 1), n_) = state_.stages[static_cast<std::size_t>(i - 1)].back().value;
                Y_.segment(int_off(i - 1), int_size_) = stage_integral_now(i, 0.0);
            }
            apriori_.emplace(cascade_, sup0);
        }

        if (st_.gas_predictor) {
            gas_hist_ = dde::HistoryBuffer(n_, gas_cfg_.delta, slack);
            const long m = std::lround(gas_cfg_.delta / dt_);
            const double shift = -r_ + gas_cfg_.delta;
            for (long j = m; j >= 0; --j) {
                const double theta = -static_cast<double>(j) * dt_;
                gas_hist_.push(theta, initial_stage_value(1, theta, shift, z0),
                               initial_stage_slope(theta, shift));
            }
            gas_cfg_.E0 = gas_initial_mismatch(gas_cfg_, *st_.gas, plant_, gas_hist_, z0, u_);
            gas_xi_ = gas_hist_.back().value;
        }

        trace_.n = n_;
        trace_.k = plant_.k;
        trace_.dt = dt_;
        trace_.r = r_;
        trace_.seed = sc_.seed;
        trace_.stage_err.assign(static_cast<std::size_t>(p_ > 0 ? p_ : (st_.gas_predictor ? 1 : 0)),
                                {});
    }

    /// Whether some input argument used by the right-hand side switches at t.
    bool input_switch_near(double t) const {
        const double tol = 1e-9 * dt_;
        for (double ts : u_.switch_times()) {
            if (std::abs(ts - t) <= tol || std::abs(ts - (t - r_)) <= tol) return true;
            for (int j = 0; j < p_; ++j)
                if (std::abs(ts - (t - r_ + j * cascade_.delta)) <= tol) return true;
        }
        return false;
    }

    bool on_grid(double t) const {
        return std::abs(t - std::round(t / dt_) * dt_) <= 1e-9 * dt_;
    }

    void step(double t, double h) {
        const Vec k1 = (k1_valid_ && k1_t_ == t) ? k1_ : rhs(t, Y_);
        // The last stage sits on the right end, where inputs are taken from the left.
        const double end = t + h - 1e-9 * dt_;
        Y_ = dde::rk4_step(
            Y_, [this, end](double s, const Vec& y) { return s >= end ? rhs(s, y, u_left_) : rhs(s, y); },
            t, h, k1,
            [this](const Vec& y) { return channel_of(y); });
        k1_valid_ = false;
    }

    void on_event(double tau) {
        if (p_ > 0 && on_grid(tau)) {
            // One-sided slopes of the stages just before the reset.
            const Vec pre = rhs(tau, Y_, u_left_);
            pending_left_.clear();
            for (int i = 0; i < p_; ++i) pending_left_.push_back(pre.segment(xi_off(i), n_));
            pending_left_t_ = tau;
        }
        BridgeState bridge{Y_.segment(ow_, plant_.k), last_reset_};
        const Vec x_now = Y_.head(n_);
        trace_.events.push_back(
            apply_reset(bridge, plant_, x_at(tau - r_, tau, x_now), tau, sc_.noise));
        last_reset_ = bridge.last_reset_index;
        Y_.segment(ow_, plant_.k) = bridge.w;
        k1_valid_ = false;
    }

    void on_node(double t) {
        const bool initial = node_count_ == 0;
        const Vec x = Y_.head(n_);
        if (!initial) {
            Vec slope = plant_.f(x, u_(t));
            Vec slope_left = plant_.f(x, u_left_(t));
            x_hist_.push(t, x, std::move(slope), slope_left == slope ? Vec() : std::move(slope_left));
            x_hist_.trim();
        }
        if (p_ > 0 && !initial) {
            for (int i = 1; i <= p_; ++i) {
                push_integrand(i, t, Y_.segment(xi_off(i - 1), n_));
                Y_.segment(int_off(i - 1), int_size_) = stage_integral_now(i, t);
            }
        }
        k1_ = rhs(t, Y_);
        k1_t_ = t;
        k1_valid_ = true;

        if (p_ > 0 && !initial && pending_left_t_ != t && input_switch_near(t)) {
            const Vec pre = rhs(t, Y_, u_left_);
            pending_left_.clear();
            for (int i = 0; i < p_; ++i) pending_left_.push_back(pre.segment(xi_off(i), n_));
            pending_left_t_ = t;
        }
        if (p_ > 0) {
            const bool kink = pending_left_t_ == t;
            for (int i = 1; i <= p_; ++i) {
                Vec slope = k1_.segment(xi_off(i - 1), n_);
                auto& buf = state_.stages[static_cast<std::size_t>(i - 1)];
                if (initial) {
                    buf.set_back_derivative(std::move(slope));
                } else {
                    push_stage_node(state_, i, t, Y_.segment(xi_off(i - 1), n_), slope,
                                    kink ? pending_left_[static_cast<std::size_t>(i - 1)] : Vec());
                }
            }
        }

        if (st_.gas_predictor && !initial) {
            Vec z, z_dot;
            feed(t, Y_, &k1_, z, z_dot);
            const GasUpdate upd =
                gas_predictor_update(gas_cfg_, *st_.gas, plant_, gas_hist_, z, t, u_);
            gas_xi_ = upd.xi;
            auto& diag = trace_.diagnostics;
            diag.saturation_worst_ratio = std::max(diag.saturation_worst_ratio, upd.saturation_ratio);
            diag.gas_max_iterations = std::max(diag.gas_max_iterations, upd.iterations);
        }

        if (node_count_ % sc_.stride == 0) record(t);
        last_node_t_ = t;
        ++node_count_;
        trace_.diagnostics.steps = node_count_ - 1;
    }

    void record(double t) {
        const Vec x = Y_.head(n_);
        trace_.t.push_back(t);
        trace_.x.push_back(x);
        const bool has_pred = p_ > 0 || st_.gas_predictor.has_value();
        Vec z, z_dot;
        if (observer_ || has_pred) {
            feed(t, Y_, &k1_, z, z_dot);
            trace_.z.push_back(z);
            trace_.e_obs.push_back((z - x_at(t - r_, t, x)).norm());
        }
        if (observer_) trace_.w.push_back(Y_.segment(ow_, plant_.k));
        if (p_ > 0) {
            trace_.xi_p.push_back(Y_.segment(xi_off(p_ - 1), n_));
            for (int i = 1; i <= p_; ++i) {
                const Vec xi = Y_.segment(xi_off(i - 1), n_);
                const Vec target = x_at(t - r_ + i * cascade_.delta, t, x);
                trace_.stage_err[static_cast<std::size_t>(i - 1)].push_back((xi - target).norm());
            }
            // A-priori growth bound on the first stage.
            double sup = 0.0;
            for (const auto& node : state_.stages[0].nodes())
                if (node.t >= t - cascade_.delta - 1e-9 * dt_) sup = std::max(sup, node.value.norm());
            const double forcing = (z_dot + cascade_.mu * z).norm();
            const double zero = plant_.f(Vec::Zero(n_), u_(t - r_ + cascade_.delta)).norm();
            apriori_->update(t, sup, forcing, zero);
        } else if (st_.gas_predictor) {
            trace_.xi_p.push_back(gas_xi_);
            trace_.stage_err[0].push_back(
                (gas_xi_ - x_at(t - r_ + gas_cfg_.delta, t, x)).norm());
        }
        if (has_pred) trace_.e_pred.push_back((trace_.xi_p.back() - x).norm());
    }

    const Scenario& sc_;
    const Setup& st_;
    const Plant& plant_;
    const InputSignal& u_;
    // Used at the right end of a step and for one-sided slopes at switches.
    InputSignal u_left_;
    int n_;
    double r_;
    double dt_;
    bool observer_;
    int p_ = 0;
    bool linear_form_ = false;
    CascadeConfig cascade_;
    GasPredictorConfig gas_cfg_;
    Vec d_;
    InitialHistory x0_;

    Eigen::Index oz_ = 0, ow_ = 0, os_ = 0, int_size_ = 0;
    Vec Y_;
    dde::HistoryBuffer x_hist_;
    CascadeState state_;
    dde::HistoryBuffer gas_hist_;
    Vec gas_xi_;
    std::optional<AprioriBound> apriori_;

    bool k1_valid_ = false;
    double k1_t_ = NAN;
    Vec k1_;
    std::vector<Vec> pending_left_;
    double pending_left_t_ = NAN;
    long last_reset_ = -1;
    long node_count_ = 0;
    double last_node_t_ = 0.0;
    SimTrace trace_;
};

}  // namespace

SimTrace simulate(const Scenario& scenario, const Setup& setup) {
    Simulator sim(scenario, setup);
    return sim.run();
}

SimTrace run_scenario(const Scenario& scenario, bool enforce_conditions) {
    const Setup setup = prepare(scenario);
    if (enforce_conditions) enforce(setup.report);
    return simulate(scenario, setup);
}

}  // namespace sdobs
