#pragma once

#include "certpose/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace certpose {

struct GncConfig {
    double mu_init = 6000.0;
    double mu_rate = 1.10;
    double c_bar_sq = 1e-5;
    double inlier_threshold = 0.9;
    std::size_t min_inliers = 12;
    int inner_iters = 2;
    int max_outer_iters = 500;
    double conv_tol = 1e-6;

    void validate() const {
        if (mu_init < 1.0 || mu_rate <= 1.0 || c_bar_sq <= 0.0 || inlier_threshold <= 0.0 ||
            inlier_threshold >= 1.0 || inner_iters < 1)
            throw std::invalid_argument("GncConfig: invalid parameters");
    }
};

/// Tukey's biweight, saturating at 1/3 beyond |r| = c_bar.
inline double tukey_rho(double r, double c_bar) {
    if (c_bar <= 0.0) throw std::invalid_argument("tukey_rho: c_bar must be positive");
    double x = (r * r) / (c_bar * c_bar);
    if (x > 1.0) return 1.0 / 3.0;
    return x - x * x + x * x * x / 3.0;
}

/// GNC surrogate with scale mu * c_bar^2; equals tukey_rho at mu = 1.
inline double tukey_surrogate(double r, double c_bar, double mu) {
    if (mu < 1.0) throw std::invalid_argument("tukey_surrogate: mu must be >= 1");
    double x = (r * r) / (mu * c_bar * c_bar);
    if (x > 1.0) return 1.0 / 3.0;
    return x - x * x + x * x * x / 3.0;
}

/// Outlier process Psi(w) = mu c^2 / 3 (1 - sqrt(w))^2 (1 + 2 sqrt(w)).
inline double outlier_process(double w, double c_bar, double mu) {
    if (w < 0.0 || w > 1.0) throw std::invalid_argument("outlier_process: w outside [0,1]");
    double s = std::sqrt(w);
    return mu * c_bar * c_bar / 3.0 * (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s);
}

/// Closed-form weight update: w_i = (1 - eps_i^2/(mu c^2))^2, zero past the cutoff.
inline std::vector<double> update_weights(const std::vector<double>& residuals, double c_bar,
                                          double mu) {
    if (mu < 1.0) throw std::invalid_argument("update_weights: mu must be >= 1");
    std::vector<double> w(residuals.size());
    double scale = mu * c_bar * c_bar;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        double x = residuals[i] * residuals[i] / scale;
        w[i] = x > 1.0 ? 0.0 : (1.0 - x) * (1.0 - x);
    }
    return w;
}

struct RobustResult {
    RelativePose pose;
    std::vector<double> weights;
    std::vector<std::size_t> inlier_indices;
    bool is_valid = false;
    std::optional<Certificate> certificate;
    int outer_iters = 0;
    std::string diagnostic;
};

namespace detail {

inline std::vector<double> residuals_at(const EssentialMatrix& e, const CorrespondenceSet& corr) {
    std::vector<double> r(corr.size());
    for (std::size_t i = 0; i < corr.size(); ++i) r[i] = epipolar_residual(e, corr.pairs[i]);
    return r;
}

inline double joint_objective(const std::vector<double>& residuals,
                              const std::vector<double>& w, double c_bar, double mu) {
    double obj = 0.0;
    for (std::size_t i = 0; i < residuals.size(); ++i)
        obj += w[i] * residuals[i] * residuals[i] + outlier_process(w[i], c_bar, mu);
    return obj;
}

}  // namespace detail

/// Graduated non-convexity with Tukey's biweight: alternate the weighted
/// manifold refinement and the closed-form weight update while annealing mu
/// from mu_init down to exactly 1.
inline RobustResult robust_estimate(const CorrespondenceSet& corr, const GncConfig& cfg = {},
                                    std::optional<RelativePose> init = std::nullopt,
                                    const SolverOptions& solver_opts = {},
                                    const CertifierOptions& cert_opts = {}) {
    cfg.validate();
    const std::size_t n = corr.size();
    if (n < std::max<std::size_t>(8, cfg.min_inliers))
        throw std::invalid_argument("robust_estimate: too few correspondences");
    const double c_bar = std::sqrt(cfg.c_bar_sq);

    RobustResult result;
    result.weights.assign(n, 1.0);
    if (init) {
        result.pose = *init;
    } else {
        EightPointResult ep = initialize_eight_point(corr);
        result.pose = pose_from_essential(ep.essential, corr).pose;
    }

    double mu = cfg.mu_init;
    std::vector<double> residuals = detail::residuals_at(essential_from_pose(result.pose), corr);
    double prev_outer_obj = detail::joint_objective(residuals, result.weights, c_bar, mu);
    bool last_mu = false;
    for (int outer = 0; outer < cfg.max_outer_iters && !last_mu; ++outer) {
        ++result.outer_iters;
        double prev_inner_obj = std::numeric_limits<double>::infinity();
        for (int inner = 0; inner < cfg.inner_iters; ++inner) {
            CorrespondenceSet weighted = corr;
            weighted.weights = result.weights;
            DataMatrix c = build_data_matrix(weighted);
            Eigen::SelfAdjointEigenSolver<Mat9> eig(c.c, Eigen::EigenvaluesOnly);
            int rank = (eig.eigenvalues().array() >
                        1e-12 * std::max(eig.eigenvalues()(8), 1e-300))
                           .count();
            if (rank < 6) {
                result.is_valid = false;
                result.diagnostic = "weighted data matrix rank collapse";
                return result;
            }
            SolveReport rep = refine_on_manifold(c, result.pose, solver_opts);
            result.pose = rep.pose;
            residuals = detail::residuals_at(essential_from_pose(result.pose), corr);
            result.weights = update_weights(residuals, c_bar, mu);
            double obj = detail::joint_objective(residuals, result.weights, c_bar, mu);
            if (std::abs(prev_inner_obj - obj) < cfg.conv_tol) break;
            prev_inner_obj = obj;
        }
        double outer_obj = detail::joint_objective(residuals, result.weights, c_bar, mu);
        if (std::abs(prev_outer_obj - outer_obj) < cfg.conv_tol) break;
        prev_outer_obj = outer_obj;
        // geometric schedule, last value clamped to exactly 1
        if (mu <= 1.0) last_mu = true;
        mu = std::max(mu / cfg.mu_rate, 1.0);
    }

    for (std::size_t i = 0; i < n; ++i)
        if (result.weights[i] > cfg.inlier_threshold) result.inlier_indices.push_back(i);

    if (result.inlier_indices.size() < cfg.min_inliers) {
        result.is_valid = false;
        result.diagnostic = "not enough inliers";
        return result;
    }

    // final refinement restricted to the inlier set, warm-started
    CorrespondenceSet inliers;
    for (std::size_t i : result.inlier_indices) inliers.pairs.push_back(corr.pairs[i]);
    DataMatrix c_in = build_data_matrix(inliers);
    SolveReport rep = refine_on_manifold(c_in, result.pose, solver_opts);
    result.pose = rep.pose;
    result.certificate = certify(c_in, result.pose, cert_opts);
    result.is_valid = true;
    return result;
}

}  // namespace certpose
