#include "sdobs/observer.hpp"

#include "sdobs/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdobs {

double spectral_norm(const Mat& A) {
    if (A.size() == 0) return 0.0;
    const Mat AtA = A.transpose() * A;
    Vec v = Vec::Ones(AtA.cols()) / std::sqrt(static_cast<double>(AtA.cols()));
    // Perturb the start so that it is not orthogonal to the dominant vector.
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 1e-3 * static_cast<double>(i + 1);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Vec next = AtA * v;
        const double nn = next.norm();
        if (nn == 0.0) return 0.0;
        next /= nn;
        const double converged = std::abs(nn - lambda);
        lambda = nn;
        v = std::move(next);
        if (converged <= 1e-12 * lambda) break;
    }
    return std::sqrt(v.dot(AtA * v));
}

ObserverGains ObserverGains::make(Mat P, Mat K, Mat H, double q, double L) {
    const auto n = P.rows();
    if (P.cols() != n || n == 0) throw ConfigError("P must be a non-empty square matrix");
    if (K.rows() != n) throw ConfigError("K must have n rows");
    if (H.cols() != n) throw ConfigError("H must have n columns");
    if (K.cols() != H.rows()) throw ConfigError("K must have k columns (k = rows of H)");
    if (!(q > 0.0)) throw ConfigError("q must be positive");
    if (!(L > 0.0)) throw ConfigError("L must be positive");
    if ((P - P.transpose()).norm() > 1e-12 * (1.0 + P.norm()))
        throw ConfigError("P must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> eig(P);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (!(min_eig > 0.0)) throw ConfigError("P must be positive definite");

    ObserverGains g;
    g.P = std::move(P);
    g.K = std::move(K);
    g.H = std::move(H);
    g.q = q;
    g.L = L;
    g.norm_P = spectral_norm(g.P);
    g.norm_H = spectral_norm(g.H);
    g.R = min_eig;
    g.sigma = q / (2.0 * g.norm_P);
    g.M_slope = std::sqrt(g.norm_P / g.R);
    const Mat KPPK = g.K.transpose() * g.P * g.P * g.K;
    g.gamma = std::sqrt(spectral_norm(KPPK)) / q * g.M_slope;
    g.C = L * g.norm_H * g.gamma;
    return g;
}

void require_matching_output(const ObserverGains& gains, const Plant& plant) {
    if (!plant.H) throw ConfigError("observer requires a plant with linear output h(x) = Hx");
    if (plant.H->rows() != gains.H.rows() || plant.H->cols() != gains.H.cols() ||
        (*plant.H - gains.H).norm() > 1e-12 * (1.0 + gains.H.norm()))
        throw ConfigError("observer output matrix H does not match the plant output");
}

Vec observer_rhs(const ObserverGains& gains, const Plant& plant, const Vec& z, const Vec& w,
                 const Vec& u_delayed) {
    if (z.size() != gains.P.rows() || w.size() != gains.H.rows())
        throw ConfigError("observer state/measurement dimension mismatch");
    return plant.f(z, u_delayed) + gains.K * (gains.H * z - w);
}

Vec saturated_observer_rhs(const ObserverGains& gains, const Plant& plant, const Vec& z,
                           const Vec& w, const Vec& u_delayed, double radius) {
    if (z.size() != gains.P.rows() || w.size() != gains.H.rows())
        throw ConfigError("observer state/measurement dimension mismatch");
    Vec injection = gains.K * (gains.H * z - w);
    const double zz = z.squaredNorm();
    if (radius > 0.0 && zz >= radius * radius) {
        const double outward = z.dot(injection);
        if (outward > 0.0) injection -= (outward / zz) * z;
    }
    return plant.f(z, u_delayed) + injection;
}

OneSidedReport check_one_sided_lipschitz(const ObserverGains& gains, const Plant& plant, double box_radius,
                          int samples, std::uint64_t seed) {
    if (samples < 1) throw ConfigError("check_one_sided_lipschitz needs at least one sample");
    require_matching_output(gains, plant);
    const Mat PKH = gains.P * gains.K * gains.H;
    Rng rng(seed);
    OneSidedReport report;
    const std::vector<Vec> inputs = plant.input_set.grid(3);
    for (int s = 0; s < samples; ++s) {
        Vec x(plant.n), z(plant.n);
        for (int i = 0; i < plant.n; ++i) {
            x(i) = rng.uniform(-box_radius, box_radius);
            z(i) = rng.uniform(-box_radius, box_radius);
        }
        if (s % 2 == 1) {
            // Local pair.
            for (int i = 0; i < plant.n; ++i) z(i) = x(i) + 1e-3 * box_radius * rng.uniform(-1, 1);
        }
        const Vec e = z - x;
        const double e2 = e.squaredNorm();
        if (e2 < 1e-24) continue;
        for (const Vec& u : inputs) {
            const Vec fz = plant.f(z, u);
            const Vec fx = plant.f(x, u);
            const double lhs = e.dot(gains.P * (fz - fx)) + e.dot(PKH * e);
            const double margin = (lhs + gains.q * e2) / e2;
            // Cancellation in f(z) − f(x) is amplified by 1/|e|.
            const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * gains.norm_P *
                                    (fz.norm() + fx.norm()) / std::sqrt(e2);
            report.worst_margin = std::max(report.worst_margin, margin);
            report.worst_adjusted = std::max(report.worst_adjusted, margin - roundoff);
        }
        ++report.pairs_checked;
    }
    constexpr double tol = 1e-12;
    report.pass = report.pairs_checked > 0 && report.worst_adjusted <= tol;
    if (plant.linear) {
        const Mat A = plant.linear->F + gains.K * gains.H;
        const Mat Q = A.transpose() * gains.P + gains.P * A +
                      2.0 * gains.q * Mat::Identity(plant.n, plant.n);
        Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (Q + Q.transpose()));
        report.lmi_max_eigenvalue = eig.eigenvalues().maxCoeff();
        report.pass = report.pass && *report.lmi_max_eigenvalue <= 1e-10;
    }
    return report;
}

double small_gain_product(double C, double sigma, double B) { return C * B * std::exp(sigma * B); }

ObserverConstants compute_constants(const ObserverGains& gains) {
    ObserverConstants c;
    c.sigma = gains.sigma;
    c.gamma = gains.gamma;
    c.C = gains.C;
    c.M_slope = gains.M_slope;
    if (!(gains.C > 0.0)) {
        c.B_simple = c.B_star = INFINITY;
        return c;
    }
    c.B_simple = 1.0 / gains.C;
    double lo = 0.0, hi = c.B_simple;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (small_gain_product(c.C, c.sigma, mid) < 1.0) lo = mid;
        else hi = mid;
    }
    c.B_star = 0.5 * (lo + hi);
    return c;
}

}  // namespace sdobs
