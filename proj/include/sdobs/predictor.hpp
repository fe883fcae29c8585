#pragma once

// r-horizon state predictors: the p-stage cascade for globally Lipschitz
// plants, its linear specialization, and the saturated predictor for plants
// with a globally asymptotically stable compact set.

#include "sdobs/dde.hpp"
#include "sdobs/plant.hpp"
#include "sdobs/types.hpp"

#include <functional>
#include <span>
#include <vector>

namespace sdobs {

/// L (e^{σδ} − 1) / σ.
double cascade_gain_product(double sigma, double delta, double L);

/// σ / (σ − L(e^{σδ} − 1)); throws GainConditionViolated when the gain
/// product is ≥ 1.
double cascade_beta(double sigma, double delta, double L);

struct CascadeConfig {
    double r = 0.0;
    int p = 1;
    double delta = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
    double L = 0.0;
    double beta = 1.0;
    double gain_product = 0.0;  // L (e^{σδ} − 1)/σ, must be < 1
    double L_delta = 0.0;       // the weaker sufficient check L δ < 1
    bool L_delta_ok = false;
};

/// Throws ConfigError on non-positive inputs and GainConditionViolated when
/// the gain product reaches 1 or μ ≤ σ.
CascadeConfig validate_cascade(double r, int p, double mu, double sigma, double L);

/// Stage histories ξ_i and the cached integrands g_i(s) = f(ξ_i(s), u(s − r + iδ)).
struct CascadeState {
    std::vector<dde::HistoryBuffer> stages;
    std::vector<dde::HistoryBuffer> integrands;
    std::vector<Vec> stage_derivatives;
};

/// Empty buffers sized for window δ plus `slack`.
CascadeState make_cascade_state(const CascadeConfig& cfg, int n, double slack);

/// f(ξ, u(s − r + iδ)) for 1-based `stage`.
Vec stage_integrand(const CascadeConfig& cfg, const Plant& plant, const InputSignal& u, int stage,
                    double s, const Vec& xi);

/// Appends g_i(t) to the integrand cache of `stage` (1-based).
void push_integrand_node(CascadeState& state, const CascadeConfig& cfg, const Plant& plant,
                         const InputSignal& u, int stage, double t, const Vec& xi);

/// Linear form: the cache of `stage` holds ξ_i itself.
void push_lti_integrand_node(CascadeState& state, int stage, double t, const Vec& xi);

/// Appends a node to the history of `stage` (1-based).
void push_stage_node(CascadeState& state, int stage, double t, const Vec& xi, const Vec& xi_dot,
                     const Vec& xi_dot_left = Vec());

/// ∫_{t−δ}^t f(ξ_i(s), u(s − r + iδ)) ds over the cached integrand nodes.
Vec stage_integral(const CascadeConfig& cfg, const CascadeState& state, int stage, double t);

struct StageRates {
    std::vector<Vec> xi_dot;
    /// Time derivative of each stage's window integral.
    std::vector<Vec> integral_dot;
};

/// Stage derivatives of the cascade. `integrals[i]` is the current window
/// integral of stage i+1; ξ_i(t − δ) comes from the stage history. Stage i
/// uses the freshly computed ξ̇_{i−1} (ξ̇_0 = z_dot).
StageRates cascade_rhs(const CascadeConfig& cfg, const CascadeState& state, const Plant& plant,
                       std::span<const Vec> xi, std::span<const Vec> integrals, const Vec& z,
                       const Vec& z_dot, const InputSignal& u, double t);

/// Linear form. `integrals[i]` stacks ∫ξ_i (n rows) over ∫u(s − r + iδ) (m rows).
StageRates lti_cascade_rhs(const Mat& F, const Mat& G, const CascadeConfig& cfg,
                           const CascadeState& state, std::span<const Vec> xi,
                           std::span<const Vec> integrals, const Vec& z, const Vec& z_dot,
                           const InputSignal& u, double t);

/// [∫ξ_i ; ∫u(s − r + iδ)] over [t − δ, t] for the linear form, with ∫ξ_i
/// taken over the ξ cache filled by push_lti_integrand_node.
Vec lti_stage_integral(const CascadeConfig& cfg, const CascadeState& state, int stage, double t,
                       const InputSignal& u);

/// Online check of the a-priori growth bound on sup_{[t−δ,t]} |ξ_1|.
class AprioriBound {
   public:
    AprioriBound(const CascadeConfig& cfg, double initial_sup);

    /// Folds in |ż + μ z| and |f(0, u)| seen at time t and returns
    /// observed / bound (≤ 1 when the bound holds; 0 once the bound overflows).
    double update(double t, double observed_sup, double forcing, double zero_field);
    double worst_ratio() const { return worst_; }

   private:
    double rate_;
    double initial_sup_;
    double mu_delta_plus_two_;
    double forcing_sup_ = 0.0;
    double zero_field_sup_ = 0.0;
    double worst_ = 0.0;
};

/// (σ + G2(e^{σδ} − 1)) / (σ − G1(e^{σδ} − 1)); throws GainConditionViolated
/// when G1(e^{σδ} − 1)/σ ≥ 1.
double beta_gas(double sigma, double delta, double G1, double G2);

struct GasPredictorConfig {
    double r = 0.0;
    double delta = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
    double K_sat = 2.0;
    std::function<double(double)> q_fn;
    double G1 = 0.0;
    double G2 = 0.0;
    double gain_product = 0.0;  // G1 (e^{σδ} − 1)/σ
    bool gain_ok = false;
    double beta = NAN;  // set only when gain_ok
    Vec E0;             // filled by gas_initial_mismatch
};

/// Builds the configuration. With `enforce` the gain condition and μ ≥ σ are
/// required (GainConditionViolated otherwise); without it they are only
/// reported, so the update law can still be exercised.
GasPredictorConfig make_gas_predictor_config(double r, double delta, double mu, double sigma,
                                             const GasPlantData& gas, bool enforce = true);

/// f(q(|ξ|/ψ) ξ, u(s − r + δ)).
Vec gas_integrand(const GasPredictorConfig& cfg, const Plant& plant, const InputSignal& u,
                  double s, const Vec& xi, double psi);

/// ξ(0) − z(0) − ∫_{−δ}^0 f(q(|ξ(s)|/ψ(z(0))) ξ(s), u(s − r + δ)) ds.
Vec gas_initial_mismatch(const GasPredictorConfig& cfg, const GasPlantData& gas,
                         const Plant& plant, const dde::HistoryBuffer& xi_history, const Vec& z0,
                         const InputSignal& u);

struct GasUpdate {
    Vec xi;
    /// max over quadrature nodes of q(|ξ|/ψ)|ξ| / (K_sat ψ).
    double saturation_ratio = 0.0;
    int iterations = 0;
};

/// ξ(t) from the integral solution of the saturated predictor. The implicit
/// endpoint term is resolved by fixed-point iteration. The new node is
/// appended to `xi_history` with a divided-difference derivative.
GasUpdate gas_predictor_update(const GasPredictorConfig& cfg, const GasPlantData& gas,
                               const Plant& plant, dde::HistoryBuffer& xi_history, const Vec& z,
                               double t, const InputSignal& u);

}  // namespace sdobs
