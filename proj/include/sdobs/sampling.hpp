#pragma once

// The link between the sampled, delayed sensor and the continuous observer:
// sampling partitions, the inter-sample output predictor w and measurement
// noise.

#include "sdobs/dde.hpp"
#include "sdobs/plant.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sdobs {

enum class ScheduleKind { uniform, jittered };

struct SamplingSchedule {
    double b = 0.0;
    double B = 0.0;
    std::vector<double> times;  // τ0 = 0 < τ1 < ...
    ScheduleKind kind = ScheduleKind::uniform;
    std::uint64_t seed = 0;
};

/// Partition of [0, horizon] (the last time is ≥ horizon). Uniform schedules
/// step by (b+B)/2; jittered schedules draw each increment uniformly from
/// [b, B]. Throws ConfigError unless 0 < b ≤ B.
SamplingSchedule generate_partition(double b, double B, double horizon, ScheduleKind kind,
                                    std::uint64_t seed);

/// Measurement error v applied at sampling instants.
struct NoiseModel {
    enum class Kind { zero, constant, bounded_random, decaying };

    Kind kind = Kind::zero;
    double epsilon = 0.0;
    double rate = 0.0;
    std::uint64_t seed = 0;

    /// |v| ≤ bound() for every sample.
    double bound() const;
    /// v at sampling instant `tau` (the `index`-th reset), in ℝ^k.
    Vec sample(double tau, std::size_t index, int k) const;
};

std::string to_string(NoiseModel::Kind kind);

struct BridgeState {
    Vec w;
    long last_reset_index = -1;
};

/// One impulsive update of w.
struct ResetRecord {
    double tau = 0.0;
    Vec v;
    Vec w_pre;
    Vec w_post;
};

/// w' = L_f h(x̂, u(t − r)).
Vec w_rhs(const Plant& plant, const Vec& x_hat, const Vec& u_delayed);

/// h(x(τ − r)) + v(τ), reading the delayed state from `x_history`.
Vec reset_w(const Plant& plant, const dde::HistoryBuffer& x_history, double tau, double r,
            const NoiseModel& noise, std::size_t index);

/// Applies the reset to `state` and returns the audit record.
ResetRecord apply_reset(BridgeState& state, const Plant& plant,
                        const dde::HistoryBuffer& x_history, double tau, double r,
                        const NoiseModel& noise);

/// Same, with the delayed state x(τ − r) already evaluated by the caller.
ResetRecord apply_reset(BridgeState& state, const Plant& plant, const Vec& x_delayed, double tau,
                        const NoiseModel& noise);

}  // namespace sdobs
