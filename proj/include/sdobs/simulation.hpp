#pragma once

// Co-integration of plant, inter-sample predictor, observer and state
// predictor on one time grid with impulsive resets at the sampling instants.

#include "sdobs/sampling.hpp"
#include "sdobs/scenario.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sdobs {

struct SimDiagnostics {
    /// Worst observed/bound ratio of the first-stage a-priori growth bound.
    double apriori_worst_ratio = 0.0;
    /// Worst q(|ξ|/ψ)|ξ| / (K_sat ψ) over every GAS quadrature node (≤ 1).
    double saturation_worst_ratio = 0.0;
    int gas_max_iterations = 0;
    long steps = 0;
};

/// Column-oriented record of one run. Channels that do not exist in the
/// selected mode hold empty vectors.
struct SimTrace {
    std::vector<double> t;
    std::vector<Vec> x;
    std::vector<Vec> z;
    std::vector<Vec> w;
    std::vector<Vec> xi_p;
    std::vector<double> e_obs;   // |z − x(t − r)|
    std::vector<double> e_pred;  // |ξ_p − x(t)|
    /// stage_err[i][j] = |ξ_{i+1}(t_j) − x(t_j − r + (i+1)δ)|.
    std::vector<std::vector<double>> stage_err;
    std::vector<ResetRecord> events;

    int n = 0;
    int k = 0;
    double dt = 0.0;
    double r = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
    SimDiagnostics diagnostics;

    std::size_t size() const { return t.size(); }
};

/// Runs a prepared scenario. The returned trace is deterministic for a fixed
/// scenario. Throws IntegrationDiverged with time and channel on blow-up.
SimTrace simulate(const Scenario& scenario, const Setup& setup);

/// prepare + (optionally) enforce + simulate.
SimTrace run_scenario(const Scenario& scenario, bool enforce_conditions = true);

}  // namespace sdobs
