#include "sdobs/plant.hpp"

#include "sdobs/random.hpp"
#include "sdobs/saturation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sdobs {

bool InputBox::contains(const Vec& u, double tol) const {
    if (u.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (u(i) < lower(i) - tol || u(i) > upper(i) + tol) return false;
    return true;
}

std::vector<Vec> InputBox::grid(int per_axis) const {
    const auto m = lower.size();
    std::vector<Vec> out;
    if (m == 0) {
        out.emplace_back(0);
        return out;
    }
    per_axis = std::max(per_axis, 1);
    std::size_t total = 1;
    for (Eigen::Index i = 0; i < m; ++i) total *= static_cast<std::size_t>(per_axis);
    out.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vec u(m);
        std::size_t rem = flat;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto j = static_cast<double>(rem % static_cast<std::size_t>(per_axis));
            rem /= static_cast<std::size_t>(per_axis);
            const double frac = per_axis == 1 ? 0.5 : j / (per_axis - 1);
            u(i) = lower(i) + frac * (upper(i) - lower(i));
        }
        out.push_back(std::move(u));
    }
    return out;
}

InputSignal::InputSignal(Vec constant) : times_{0.0}, values_{std::move(constant)} {}

InputSignal::InputSignal(std::vector<double> switch_times, std::vector<Vec> values)
    : times_(std::move(switch_times)), values_(std::move(values)) {
    if (times_.empty() || times_.size() != values_.size())
        throw ConfigError("input signal needs one value per switch time");
    if (!std::is_sorted(times_.begin(), times_.end()))
        throw ConfigError("input switch times must be sorted");
    for (const auto& v : values_)
        if (v.size() != values_.front().size()) throw ConfigError("input dimension mismatch");
}

Vec InputSignal::operator()(double t) const {
    if (values_.empty()) return Vec(0);
    // Grid times that miss a switch by roundoff count as on it.
    const double snap = 1e-12 * std::max(1.0, std::abs(t));
    auto it = from_left_ ? std::lower_bound(times_.begin(), times_.end(), t - snap)
                         : std::upper_bound(times_.begin(), times_.end(), t + snap);
    if (it == times_.begin()) return values_.front();
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

InputSignal InputSignal::left_continuous() const {
    InputSignal out = *this;
    out.from_left_ = true;
    return out;
}

bool InputSignal::jump_near(double t, double tol, Vec& before, Vec& after) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
    if (it == times_.end() || *it > t + tol || it == times_.begin()) return false;
    const auto j = static_cast<std::size_t>(it - times_.begin());
    if (values_[j] == values_[j - 1]) return false;
    before = values_[j - 1];
    after = values_[j];
    return true;
}

Vec InputSignal::integral(double a, double b) const {
    if (values_.empty()) return Vec(0);
    if (b < a) return -integral(b, a);
    Vec acc = Vec::Zero(dimension());
    double left = a;
    for (std::size_t j = 1; j <= times_.size() && left < b; ++j) {
        const double edge = j < times_.size() ? times_[j] : INFINITY;
        if (edge <= left) continue;
        const double right = std::min(edge, b);
        acc += (right - left) * values_[j - 1];
        left = right;
    }
    return acc;
}

Vec eval_Lfh(const Plant& plant, const Vec& x, const Vec& u) {
    const Vec fx = plant.f(x, u);
    if (plant.H) return *plant.H * fx;
    const double speed = fx.norm();
    if (speed == 0.0) return Vec::Zero(plant.k);
    const double step = 1e-6 * (1.0 + x.norm());
    const Vec dir = fx / speed;
    return (plant.h(x + step * dir) - plant.h(x - step * dir)) * (speed / (2.0 * step));
}

namespace {

Vec random_in_box(Rng& rng, int n, double radius) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.uniform(-radius, radius);
    return v;
}

Vec random_in_ball(Rng& rng, int n, double radius) {
    // Rejection from the enclosing cube keeps the draw portable.
    while (true) {
        Vec v = random_in_box(rng, n, 1.0);
        if (v.squaredNorm() <= 1.0) return radius * v;
    }
}

Vec random_input(Rng& rng, const InputBox& box) {
    Vec u(box.lower.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.uniform(box.lower(i), box.upper(i));
    return u;
}

Vec clip_to_ball(Vec v, double radius) {
    const double nv = v.norm();
    if (nv > radius) v *= radius / nv;
    return v;
}

/// Perturbation with a log-uniform scale in [lo, hi].
Vec random_offset(Rng& rng, int n, double lo, double hi) {
    Vec dir = random_in_ball(rng, n, 1.0);
    const double nd = dir.norm();
    if (nd == 0.0) dir = Vec::Unit(n, 0);
    else dir /= nd;
    const double scale = std::exp(rng.uniform(std::log(lo), std::log(hi)));
    return scale * dir;
}

}  // namespace

double estimate_lipschitz(const Plant& plant, double box_radius, int samples, std::uint64_t seed) {
    if (samples < 2) throw ConfigError("estimate_lipschitz needs at least 2 samples");
    Rng rng(seed);
    const std::vector<Vec> inputs = plant.input_set.grid(5);
    double best = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Vec x = random_in_box(rng, plant.n, box_radius);
        // Half of the pairs are local so that slopes near a point are probed.
        Vec z = (s % 2 == 0) ? random_in_box(rng, plant.n, box_radius)
                             : x + random_offset(rng, plant.n, 1e-6 * box_radius, box_radius);
        for (int i = 0; i < plant.n; ++i) z(i) = std::clamp(z(i), -box_radius, box_radius);
        const double gap = (x - z).norm();
        if (gap < 1e-12) continue;
        for (const Vec& u : inputs)
            best = std::max(best, (plant.f(x, u) - plant.f(z, u)).norm() / gap);
    }
    return best;
}

Plant make_lti(Mat F, Mat G, Mat H) {
    if (F.rows() != F.cols()) throw ConfigError("F must be square");
    if (G.rows() != F.rows()) throw ConfigError("G must have as many rows as F");
    if (H.cols() != F.rows()) throw ConfigError("H must have as many columns as F");
    Plant p;
    p.name = "lti";
    p.n = static_cast<int>(F.rows());
    p.m = static_cast<int>(G.cols());
    p.k = static_cast<int>(H.rows());
    p.f = [F, G](const Vec& x, const Vec& u) -> Vec {
        if (G.cols() == 0) return F * x;
        return F * x + G * u;
    };
    p.h = [H](const Vec& x) -> Vec { return H * x; };
    p.H = H;
    p.linear = LinearModel{F, G};
    p.input_set = InputBox{Vec::Constant(p.m, -1.0), Vec::Constant(p.m, 1.0)};
    Eigen::JacobiSVD<Mat> svd(F);
    p.lipschitz_L = std::max(svd.singularValues().size() ? svd.singularValues()(0) : 0.0, 1e-12);
    return p;
}

Plant make_scalar_linear(double a) {
    Plant p = make_lti(Mat::Constant(1, 1, a), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0));
    p.name = "scalar_linear";
    return p;
}

Plant make_chain() {
    Plant p;
    p.name = "chain";
    p.n = 2;
    p.m = 1;
    p.k = 1;
    p.f = [](const Vec& x, const Vec& u) -> Vec {
        Vec dx(2);
        dx << x(1), std::sin(x(0)) + u(0);
        return dx;
    };
    Mat H(1, 2);
    H << 1.0, 0.0;
    p.h = [H](const Vec& x) -> Vec { return H * x; };
    p.H = H;
    p.input_set = InputBox{Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
    p.lipschitz_L = 1.0;
    return p;
}

double max_field_norm(const Plant& plant, double radius) {
    const std::vector<Vec> inputs = plant.input_set.grid(11);
    constexpr int radial = 400;
    std::vector<Vec> directions;
    if (plant.n == 1) {
        directions = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    } else if (plant.n == 2) {
        constexpr int angular = 72;
        for (int j = 0; j < angular; ++j) {
            const double th = 2.0 * std::numbers::pi * j / angular;
            Vec d(2);
            d << std::cos(th), std::sin(th);
            directions.push_back(std::move(d));
        }
    } else {
        Rng rng(0x5eed);
        for (int j = 0; j < 512; ++j) {
            Vec d = random_in_ball(rng, plant.n, 1.0);
            if (d.norm() > 1e-3) directions.push_back(d / d.norm());
        }
    }
    double best = 0.0;
    for (int i = 0; i <= radial; ++i) {
        const double rho = radius * i / radial;
        for (const Vec& d : directions)
            for (const Vec& u : inputs) best = std::max(best, plant.f(rho * d, u).norm());
    }
    return best;
}

std::pair<Plant, GasPlantData> make_gas_benchmark(double omega_gain, double r) {
    constexpr double a = 1.1;
    Plant p;
    p.name = "limit_cycle";
    p.n = 2;
    p.m = 1;
    p.k = 1;
    p.f = [omega_gain](const Vec& x, const Vec& u) -> Vec {
        const double radial = 1.0 - x.squaredNorm();
        const double spin = omega_gain * (1.0 + u(0));
        Vec dx(2);
        dx << x(0) * radial - spin * x(1), x(1) * radial + spin * x(0);
        return dx;
    };
    Mat H(1, 2);
    H << 1.0, 0.0;
    p.h = [H](const Vec& x) -> Vec { return H * x; };
    p.H = H;
    p.input_set = InputBox{Vec::Constant(1, -0.5), Vec::Constant(1, 0.5)};

    GasPlantData gas;
    gas.absorbing_radius = a;
    // From ρ(t)² = 1 / (1 + (1/ρ0² − 1) e^{−2t}).
    gas.absorb_time = [a](const Vec& x0) {
        const double r0 = x0.norm();
        if (r0 <= a) return 0.0;
        return -0.5 * std::log((1.0 / (a * a) - 1.0) / (1.0 / (r0 * r0) - 1.0));
    };
    gas.psi = [a](const Vec& x0) { return std::max(x0.norm(), a); };
    gas.K_sat = 2.0;
    gas.q_fn = saturation_q;
    const double K_sat = gas.K_sat;
    gas.p_of_s = [p, K_sat, a](double s) { return max_field_norm(p, K_sat * std::max(s, a)); };
    gas.horizon_r = r;
    gas.S_tilde_radius = 1.0 + a + r * gas.p_of_s(a);
    const auto [g1, g2] = estimate_G1_G2(p, gas, 4000, 1);
    gas.G1 = g1;
    gas.G2 = g2;
    return {p, gas};
}

std::pair<double, double> estimate_G1_G2(const Plant& plant, const GasPlantData& gas, int samples,
                                         std::uint64_t seed) {
    if (samples < 2) throw ConfigError("estimate_G1_G2 needs at least 2 samples");
    constexpr double floor = 1e-9;
    const double a = gas.absorbing_radius;
    const double tilde = gas.S_tilde_radius;
    const int n = plant.n;
    Rng rng(seed);

    struct Sample {
        double gap_state, gap_ref, diff;
    };
    std::vector<Sample> data;
    data.reserve(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) {
        const Vec u = random_input(rng, plant.input_set);
        const Vec x = random_in_ball(rng, n, a);
        const Vec z = random_in_ball(rng, n, a);
        const Vec xi = (s % 2 == 0) ? random_in_ball(rng, n, tilde)
                                    : clip_to_ball(x + random_offset(rng, n, 1e-4 * a, tilde), tilde);
        const Vec y = (s % 3 == 0) ? random_in_ball(rng, n, a)
                                   : clip_to_ball(z + random_offset(rng, n, 1e-4 * a, a), a);
        const double psi_z = gas.psi(z);
        const double psi_y = gas.psi(y);
        const Vec lhs = plant.f(gas.q_fn(xi.norm() / psi_z) * xi, u);
        const Vec rhs = plant.f(gas.q_fn(x.norm() / psi_y) * x, u);
        data.push_back({(xi - x).norm(), (z - y).norm(), (lhs - rhs).norm()});
    }

    // Candidate G2 values: zero plus a geometric grid.
    std::vector<double> g2_grid{0.0};
    for (int i = 0; i <= 120; ++i) g2_grid.push_back(1e-4 * std::pow(10.0, i * 7.0 / 120.0));

    double best_g1 = INFINITY, best_g2 = INFINITY;
    for (double g2 : g2_grid) {
        double g1 = 0.0;
        bool feasible = true;
        for (const Sample& d : data) {
            const double residual = d.diff - g2 * d.gap_ref;
            if (residual <= 0.0) continue;
            if (d.gap_state < 1e-12) {
                feasible = false;
                break;
            }
            g1 = std::max(g1, residual / d.gap_state);
        }
        if (feasible && g1 + g2 < best_g1 + best_g2) {
            best_g1 = g1;
            best_g2 = g2;
        }
    }
    return {std::max(1.1 * best_g1, floor), std::max(1.1 * best_g2, floor)};
}

}  // namespace sdobs
