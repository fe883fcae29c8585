#pragma once

// Continuous-time exponential observer z' = f(z,u) + K(Hz − w) for globally
// Lipschitz plants with linear output, and the constants that govern its
// sampled-data small-gain analysis.

#include "sdobs/plant.hpp"
#include "sdobs/types.hpp"

#include <cstdint>
#include <optional>

namespace sdobs {

/// Induced 2-norm by power iteration on A'A (relative tolerance 1e-12).
double spectral_norm(const Mat& A);

/// Validated observer gains (P, K, H, q, L) with derived constants.
///
/// R is the smallest eigenvalue of P, sigma = q / (2|P|),
/// gamma = (|K'PPK|^{1/2} / q) (|P|/R)^{1/2}, C = L |H| gamma and
/// M_slope = (|P|/R)^{1/2}.
struct ObserverGains {
    Mat P;
    Mat K;
    Mat H;
    double q = 0.0;
    double L = 0.0;

    double norm_P = 0.0;
    double norm_H = 0.0;
    double R = 0.0;
    double sigma = 0.0;
    double gamma = 0.0;
    double C = 0.0;
    double M_slope = 0.0;

    /// Throws ConfigError when P is not symmetric positive definite or the
    /// dimensions disagree.
    static ObserverGains make(Mat P, Mat K, Mat H, double q, double L);
};

/// f(z, u_delayed) + K (H z − w).
Vec observer_rhs(const ObserverGains& gains, const Plant& plant, const Vec& z, const Vec& w,
                 const Vec& u_delayed);

/// observer_rhs with the outward radial part of the output injection removed
/// once |z| ≥ radius.
Vec saturated_observer_rhs(const ObserverGains& gains, const Plant& plant, const Vec& z,
                           const Vec& w, const Vec& u_delayed, double radius);

/// Throws ConfigError unless the plant has a linear output equal to gains.H.
void require_matching_output(const ObserverGains& gains, const Plant& plant);

struct OneSidedReport {
    bool pass = false;
    /// Worst sampled [(z−x)'P(f(z,u)−f(x,u)) + (z−x)'PKH(z−x) + q|z−x|²] / |z−x|².
    double worst_margin = -INFINITY;
    /// Same, less a floating-point cancellation allowance; pass requires ≤ 1e-12.
    double worst_adjusted = -INFINITY;
    /// Largest eigenvalue of (F+KH)'P + P(F+KH) + 2qI, for linear plants.
    std::optional<double> lmi_max_eigenvalue;
    int pairs_checked = 0;
};

OneSidedReport check_one_sided_lipschitz(const ObserverGains& gains, const Plant& plant, double box_radius,
                          int samples, std::uint64_t seed);

struct ObserverConstants {
    double sigma = 0.0;
    double gamma = 0.0;
    double C = 0.0;
    double M_slope = 0.0;
    double B_simple = 0.0;  // 1 / C
    double B_star = 0.0;    // root of C B exp(sigma B) = 1
};

ObserverConstants compute_constants(const ObserverGains& gains);

/// C · B · exp(sigma · B).
double small_gain_product(double C, double sigma, double B);

}  // namespace sdobs
