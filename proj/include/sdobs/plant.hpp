#pragma once

#include "sdobs/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sdobs {

/// Axis-aligned box of admissible inputs.
struct InputBox {
    Vec lower;
    Vec upper;

    bool contains(const Vec& u, double tol = 1e-12) const;
    /// Points of a regular grid with `per_axis` values per input axis.
    std::vector<Vec> grid(int per_axis) const;
};

/// f(x, u) = F x + G u.
struct LinearModel {
    Mat F;
    Mat G;
};

/// Plant x' = f(x, u), y = h(x). Immutable after construction.
struct Plant {
    using Field = std::function<Vec(const Vec& x, const Vec& u)>;
    using OutputMap = std::function<Vec(const Vec& x)>;

    std::string name;
    int n = 0;
    int m = 0;
    int k = 0;
    Field f;
    OutputMap h;
    std::optional<Mat> H;  // present when h(x) = H x
    std::optional<LinearModel> linear;
    InputBox input_set;
    std::optional<double> lipschitz_L;
};

/// Piecewise-constant input signal defined on all of ℝ.
///
/// value(t) = values[j] for switch_times[j] ≤ t < switch_times[j+1]; before the
/// first switch time the first value applies. Times within 1e-12 (relative)
/// below a switch already take the new value.
class InputSignal {
   public:
    InputSignal() = default;
    explicit InputSignal(Vec constant);
    InputSignal(std::vector<double> switch_times, std::vector<Vec> values);

    Vec operator()(double t) const;
    /// The same signal evaluated from the left: at a switch time it returns the
    /// value before the switch.
    InputSignal left_continuous() const;
    /// True when a switch with a value change lies within `tol` of t; fills
    /// the values before and after it.
    bool jump_near(double t, double tol, Vec& before, Vec& after) const;
    /// Exact ∫_a^b of the signal.
    Vec integral(double a, double b) const;
    int dimension() const { return values_.empty() ? 0 : static_cast<int>(values_.front().size()); }
    const std::vector<double>& switch_times() const { return times_; }
    const std::vector<Vec>& values() const { return values_; }

   private:
    std::vector<double> times_;
    std::vector<Vec> values_;
    bool from_left_ = false;
};

/// ∇h(x)·f(x,u): H f(x,u) for linear outputs, else a central difference of h
/// along f with step 1e-6·(1+|x|).
Vec eval_Lfh(const Plant& plant, const Vec& x, const Vec& u);

/// Largest sampled ratio |f(x,u) − f(z,u)| / |x − z| over random pairs in the
/// box [−box_radius, box_radius]^n and a grid of inputs. A lower bound on L.
double estimate_lipschitz(const Plant& plant, double box_radius, int samples, std::uint64_t seed);

Plant make_lti(Mat F, Mat G, Mat H);
/// x' = a x + u, y = x.
Plant make_scalar_linear(double a = 1.0);
/// Triangular chain x1' = x2, x2' = sin(x1) + u, y = x1 (globally Lipschitz, L = 1).
Plant make_chain();

/// Absorbing-set data of a plant with a globally asymptotically stable compact set.
struct GasPlantData {
    double absorbing_radius = 0.0;  // a: S = {|x| ≤ a}
    std::function<double(const Vec&)> absorb_time;
    std::function<double(const Vec&)> psi;
    double K_sat = 2.0;
    std::function<double(double)> q_fn;
    std::function<double(double)> p_of_s;
    double horizon_r = 0.0;
    double S_tilde_radius = 0.0;  // 1 + a + r p(a)
    double G1 = 0.0;
    double G2 = 0.0;
};

/// Planar limit-cycle plant with ρ' = ρ(1 − ρ²) and absorbing ball |x| ≤ 1.1.
///
/// x1' = x1(1 − |x|²) − ω(1+u) x2, x2' = x2(1 − |x|²) + ω(1+u) x1, y = x1,
/// U = [−0.5, 0.5]. The returned data is built for prediction horizon `r`.
std::pair<Plant, GasPlantData> make_gas_benchmark(double omega_gain = 1.0, double r = 0.2);

/// max |f(ξ,u)| over u ∈ U and |ξ| ≤ radius, evaluated on a polar/input grid.
double max_field_norm(const Plant& plant, double radius);

/// Sampled fit of (G1, G2) in
/// |f(q(|ξ|/ψ(z))ξ,u) − f(q(|x|/ψ(y))x,u)| ≤ G1|ξ − x| + G2|z − y|
/// for y, x, z ∈ S, ξ ∈ S̃, u ∈ U. Returns the grid pair with the smallest
/// G1 + G2, inflated by 10% and floored at 1e-9.
std::pair<double, double> estimate_G1_G2(const Plant& plant, const GasPlantData& gas, int samples,
                                         std::uint64_t seed);

}  // namespace sdobs
