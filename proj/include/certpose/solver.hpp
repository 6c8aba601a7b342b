#pragma once

#include "certpose/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace certpose {

struct SolverOptions {
    double grad_tol = 0.0;  // 0 -> 1e-9 * (1 + trace(C))
    int max_outer_iters = 200;
    int max_inner_cg_iters = 25;
    double initial_tr_radius = 0.1;
    bool use_preconditioner = true;
};

struct SolveReport {
    RelativePose pose;
    double final_cost = 0.0;
    double grad_norm = 0.0;
    int outer_iters = 0;
    int total_inner_iters = 0;
    bool converged = false;
};

namespace detail {

struct TcgResult {
    ProductTangent step;
    int iters = 0;
};

/// Steihaug truncated CG for the trust-region subproblem
///   min <g, v> + 1/2 <H v, v>  s.t. ||v|| <= radius,
/// with boundary and negative-curvature exits. `scale` divides the model
/// uniformly (the Jacobi-like preconditioner 1/alpha); it leaves the CG
/// iterates' direction unchanged but rescales the residual magnitudes that
/// drive the superlinear stopping rule.
inline TcgResult steihaug_tcg(const CostMatrices& cm, const RelativePose& pose,
                              const ProductTangent& grad, double radius, int max_iters,
                              double scale) {
    const double kappa = 0.1, theta = 1.0;
    TcgResult out;
    ProductTangent v = ProductTangent::Zero();
    ProductTangent r = grad * (1.0 / scale);
    ProductTangent d = r * -1.0;
    double r_sq = r.squaredNorm();
    const double r0_norm = std::sqrt(r_sq);
    const double tol = r0_norm * std::min(kappa, std::pow(r0_norm, theta));

    for (int k = 0; k < max_iters; ++k) {
        ProductTangent hd = project_tangent(pose, riemannian_hessian_vp(cm, pose, d)) *
                            (1.0 / scale);
        double dhd = d.dot(hd);
        ++out.iters;
        if (dhd <= 0.0) {
            // negative curvature: go to the boundary along d
            double vd = v.dot(d), dd = d.squaredNorm();
            double tau = (-vd + std::sqrt(vd * vd + dd * (radius * radius - v.squaredNorm()))) / dd;
            out.step = v + d * tau;
            return out;
        }
        double alpha = r_sq / dhd;
        ProductTangent v_next = v + d * alpha;
        if (v_next.norm() >= radius) {
            double vd = v.dot(d), dd = d.squaredNorm();
            double tau = (-vd + std::sqrt(vd * vd + dd * (radius * radius - v.squaredNorm()))) / dd;
            out.step = v + d * tau;
            return out;
        }
        v = v_next;
        r = r + hd * alpha;
        double r_sq_next = r.squaredNorm();
        if (std::sqrt(r_sq_next) <= tol) break;
        d = r * -1.0 + d * (r_sq_next / r_sq);
        r_sq = r_sq_next;
    }
    out.step = v;
    return out;
}

}  // namespace detail

/// Truncated-Newton Riemannian trust-region refinement on SO(3) x S^2.
inline SolveReport refine_on_manifold(const DataMatrix& c, const RelativePose& init,
                                      const SolverOptions& opts = {}) {
    const double grad_tol = opts.grad_tol > 0 ? opts.grad_tol : 1e-9 * (1.0 + c.trace());
    const double scale =
        (opts.use_preconditioner && c.c.norm() > 0) ? preconditioner_alpha(c) : 1.0;

    SolveReport report;
    report.pose = init;
    EssentialMatrix e = essential_from_pose(init);
    double f = cost(c, e);
    if (!std::isfinite(f))
        throw std::invalid_argument("refine_on_manifold: non-finite cost");

    double radius = opts.initial_tr_radius;
    const double max_radius = 16.0 * opts.initial_tr_radius;

    CostMatrices cm = build_cost_matrices(c, report.pose);
    ProductTangent grad = riemannian_gradient(cm, report.pose);
    if (!std::isfinite(grad.norm()))
        throw std::invalid_argument("refine_on_manifold: non-finite gradient");

    for (int iter = 0; iter < opts.max_outer_iters; ++iter) {
        report.grad_norm = grad.norm();
        if (report.grad_norm <= grad_tol) {
            report.converged = true;
            break;
        }
        ++report.outer_iters;

        auto tcg = detail::steihaug_tcg(cm, report.pose, grad, radius, opts.max_inner_cg_iters,
                                        scale);
        report.total_inner_iters += tcg.iters;

        RelativePose trial = retract(report.pose, tcg.step);
        double f_trial = cost(c, essential_from_pose(trial));

        // model decrease in the scaled model (factor 1/2 on the cost)
        ProductTangent hv = project_tangent(
            report.pose, riemannian_hessian_vp(cm, report.pose, tcg.step));
        double model_decrease =
            -(grad.dot(tcg.step) + 0.5 * tcg.step.dot(hv)) / scale;
        double actual_decrease = 0.5 * (f - f_trial) / scale;
        double rho = model_decrease > 0 ? actual_decrease / model_decrease : -1.0;

        if (rho < 0.25)
            radius *= 0.25;
        else if (rho > 0.75 && tcg.step.norm() >= 0.99 * radius)
            radius = std::min(2.0 * radius, max_radius);

        if (rho > 0.1 && f_trial <= f) {
            report.pose = trial;
            f = f_trial;
            cm = build_cost_matrices(c, report.pose);
            grad = riemannian_gradient(cm, report.pose);
        }
        if (radius < 1e-14) break;
    }
    report.grad_norm = grad.norm();
    report.converged = report.grad_norm <= grad_tol;
    report.final_cost = f;
    return report;
}

}  // namespace certpose
