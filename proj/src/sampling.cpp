#include "sdobs/sampling.hpp"

#include "sdobs/random.hpp"

#include <cmath>

namespace sdobs {

SamplingSchedule generate_partition(double b, double B, double horizon, ScheduleKind kind,
                                    std::uint64_t seed) {
    if (!(b > 0.0)) throw ConfigError("sampling lower bound b must be positive");
    if (b > B) throw ConfigError("sampling bounds require b <= B");
    SamplingSchedule s;
    s.b = b;
    s.B = B;
    s.kind = kind;
    s.seed = seed;
    s.times.push_back(0.0);
    if (kind == ScheduleKind::uniform) {
        const double step = 0.5 * (b + B);
        for (long i = 1; s.times.back() < horizon; ++i) s.times.push_back(static_cast<double>(i) * step);
    } else {
        Rng rng(seed);
        while (s.times.back() < horizon) s.times.push_back(s.times.back() + rng.uniform(b, B));
    }
    return s;
}

double NoiseModel::bound() const {
    switch (kind) {
        case Kind::zero:
            return 0.0;
        case Kind::constant:
        case Kind::bounded_random:
        case Kind::decaying:
            return std::abs(epsilon);
    }
    return 0.0;
}

Vec NoiseModel::sample(double tau, std::size_t index, int k) const {
    const double spread = std::sqrt(static_cast<double>(k));
    switch (kind) {
        case Kind::zero:
            return Vec::Zero(k);
        case Kind::constant:
            return Vec::Constant(k, epsilon / spread);
        case Kind::decaying:
            return Vec::Constant(k, epsilon * std::exp(-rate * tau) / spread);
        case Kind::bounded_random: {
            Rng rng(splitmix64(seed ^ splitmix64(index)));
            Vec v(k);
            for (int i = 0; i < k; ++i) v(i) = rng.uniform(-1.0, 1.0) * epsilon / spread;
            return v;
        }
    }
    return Vec::Zero(k);
}

std::string to_string(NoiseModel::Kind kind) {
    switch (kind) {
        case NoiseModel::Kind::zero:
            return "zero";
        case NoiseModel::Kind::constant:
            return "constant";
        case NoiseModel::Kind::bounded_random:
            return "bounded_random";
        case NoiseModel::Kind::decaying:
            return "decaying";
    }
    return "unknown";
}

Vec w_rhs(const Plant& plant, const Vec& x_hat, const Vec& u_delayed) {
    return eval_Lfh(plant, x_hat, u_delayed);
}

Vec reset_w(const Plant& plant, const dde::HistoryBuffer& x_history, double tau, double r,
            const NoiseModel& noise, std::size_t index) {
    Vec delayed;
    try {
        delayed = x_history.interpolate(tau - r);
    } catch (const WindowUnderflow& e) {
        throw ConfigError(std::string("insufficient state history for delayed sample: ") + e.what());
    }
    return plant.h(delayed) + noise.sample(tau, index, plant.k);
}

ResetRecord apply_reset(BridgeState& state, const Plant& plant,
                        const dde::HistoryBuffer& x_history, double tau, double r,
                        const NoiseModel& noise) {
    const auto index = static_cast<std::size_t>(state.last_reset_index + 1);
    ResetRecord rec;
    rec.tau = tau;
    rec.v = noise.sample(tau, index, plant.k);
    rec.w_pre = state.w;
    state.w = reset_w(plant, x_history, tau, r, noise, index);
    rec.w_post = state.w;
    state.last_reset_index = static_cast<long>(index);
    return rec;
}

ResetRecord apply_reset(BridgeState& state, const Plant& plant, const Vec& x_delayed, double tau,
                        const NoiseModel& noise) {
    const auto index = static_cast<std::size_t>(state.last_reset_index + 1);
    ResetRecord rec;
    rec.tau = tau;
    rec.v = noise.sample(tau, index, plant.k);
    rec.w_pre = state.w;
    state.w = plant.h(x_delayed) + rec.v;
    rec.w_post = state.w;
    state.last_reset_index = static_cast<long>(index);
    return rec;
}

}  // namespace sdobs
