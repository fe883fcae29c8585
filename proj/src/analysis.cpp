#include "sdobs/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace sdobs {

DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& e, double t_start,
                        double t_end) {
    if (t.size() != e.size()) throw ConfigError("time and channel lengths differ");
    if (!(t_end > t_start)) throw ConfigError("fit window must have positive length");
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_start || t[i] > t_end || !(e[i] > 1e-14)) continue;
        const double y = std::log(e[i]);
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
        ++count;
    }
    DecayFit fit;
    fit.points = count;
    const double denom = count * stt - st * st;
    if (count < 2 || !(denom > 0.0)) {
        fit.degenerate = true;
        fit.rate = INFINITY;
        return fit;
    }
    const double slope = (count * sty - st * sy) / denom;
    fit.rate = -slope;
    fit.amplitude = std::exp((sy - slope * st) / count);
    return fit;
}

const std::vector<double>& trace_channel(const SimTrace& trace, const std::string& channel) {
    if (channel == "e_obs") return trace.e_obs;
    if (channel == "e_pred") return trace.e_pred;
    if (channel.rfind("stage_", 0) == 0) {
        const std::size_t i = std::stoul(channel.substr(6));
        if (i >= 1 && i <= trace.stage_err.size()) return trace.stage_err[i - 1];
    }
    throw ConfigError("unknown trace channel '" + channel + "'");
}

DecayFit fit_decay_rate(const SimTrace& trace, const std::string& channel, double t_start,
                        double t_end) {
    return fit_decay_rate(trace.t, trace_channel(trace, channel), t_start, t_end);
}

double tail_sup(const std::vector<double>& t, const std::vector<double>& values, double t_start) {
    double sup = 0.0;
    for (std::size_t i = 0; i < t.size() && i < values.size(); ++i)
        if (t[i] >= t_start) sup = std::max(sup, values[i]);
    return sup;
}

double estimate_iss_gain(const SimTrace& trace, double noise_bound, double tail_fraction) {
    if (!(noise_bound > 0.0)) throw ConfigError("noise_bound must be positive");
    if (trace.t.empty()) return 0.0;
    const double t0 = trace.t.front();
    const double t1 = trace.t.back();
    return tail_sup(trace.t, trace.e_pred, t1 - tail_fraction * (t1 - t0)) / noise_bound;
}

const std::vector<double>& primary_channel(const SimTrace& trace) {
    return trace.e_pred.empty() ? trace.e_obs : trace.e_pred;
}

Metrics compute_metrics(const Scenario& sc, const Setup& setup, const SimTrace& trace) {
    Metrics m;
    if (setup.constants) {
        m.constants = *setup.constants;
        m.has_constants = true;
    }
    m.theory = setup.theory;
    m.conditions_ok = setup.report.ok();
    m.diagnostics = trace.diagnostics;
    const auto& main = primary_channel(trace);
    if (!main.empty()) {
        const double t_start = sc.fit_start.value_or(0.25 * sc.horizon);
        const double t_end = sc.fit_end.value_or(sc.horizon);
        const DecayFit fit = fit_decay_rate(trace.t, main, t_start, t_end);
        m.fitted_rate = fit.rate;
        m.fit_degenerate = fit.degenerate;
        m.converged = std::isfinite(main.back()) && main.back() < sc.converge_tol;
    }
    if (!trace.e_pred.empty()) {
        m.e_pred_initial = trace.e_pred.front();
        m.e_pred_terminal = trace.e_pred.back();
    }
    if (!trace.e_obs.empty()) m.e_obs_terminal = trace.e_obs.back();
    const double bound = sc.noise.bound();
    if (bound > 0.0 && !trace.e_pred.empty()) {
        m.iss_gain = estimate_iss_gain(trace, bound, sc.tail_fraction);
        m.iss_within_bound = !(m.iss_gain > m.theory.Gamma);
    }
    return m;
}

}  // namespace sdobs
