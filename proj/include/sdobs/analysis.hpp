#pragma once

// Post-processing of simulation traces: exponential decay fits, empirical
// ISS gains and the metrics block that puts them next to the theory.

#include "sdobs/scenario.hpp"
#include "sdobs/simulation.hpp"

#include <string>
#include <vector>

namespace sdobs {

struct DecayFit {
    double rate = 0.0;  // negated slope of ln e(t)
    double amplitude = 0.0;
    int points = 0;
    bool degenerate = false;  // fewer than two usable samples: rate = +inf
};

/// Least-squares line through (t, ln e(t)) for samples in [t_start, t_end]
/// with e(t) > 1e-14.
DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& e, double t_start,
                        double t_end);

/// Channel names: "e_obs", "e_pred", "stage_<i>" (1-based).
const std::vector<double>& trace_channel(const SimTrace& trace, const std::string& channel);
DecayFit fit_decay_rate(const SimTrace& trace, const std::string& channel, double t_start,
                        double t_end);

/// sup of e_pred over the trailing `tail_fraction` of the run, divided by
/// `noise_bound`.
double estimate_iss_gain(const SimTrace& trace, double noise_bound, double tail_fraction);

/// sup of `values` over samples with t ≥ t_start.
double tail_sup(const std::vector<double>& t, const std::vector<double>& values, double t_start);

struct Metrics {
    ObserverConstants constants;
    bool has_constants = false;
    TheoryConstants theory;
    double fitted_rate = NAN;
    bool fit_degenerate = false;
    double e_pred_initial = NAN;
    double e_pred_terminal = NAN;
    double e_obs_terminal = NAN;
    double iss_gain = NAN;
    bool converged = false;
    bool iss_within_bound = true;
    bool conditions_ok = false;
    SimDiagnostics diagnostics;
};

/// The main error channel: e_pred when a predictor runs, e_obs otherwise.
const std::vector<double>& primary_channel(const SimTrace& trace);

Metrics compute_metrics(const Scenario& scenario, const Setup& setup, const SimTrace& trace);

}  // namespace sdobs
