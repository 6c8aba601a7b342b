#pragma once

#include "certpose/geometry.hpp"
#include "certpose/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace certpose {

// Column-major vec(E): entry (i,j) sits at index i + 3j, so row i of E
// occupies indices {i, i+3, i+6}. The quadratic constraints below encode
// E E^T = [t]x [t]x^T together with t^T t = 1.
struct ConstraintMatrices {
    std::array<Mat12, 7> a;  // a[k-1] is the matrix form of h_k
    std::array<double, 7> c = {1, 0, 0, 0, 0, 0, 0};
};

inline const ConstraintMatrices& constraint_matrices() {
    static const ConstraintMatrices cm = [] {
        ConstraintMatrices out;
        for (auto& m : out.a) m = Mat12::Zero();

        // h1 = t^T t - 1
        out.a[0].block<3, 3>(9, 9) = Mat3::Identity();

        // h_{1+i} = ||row_i||^2 - (||t||^2 - t_i^2), i = 1..3
        for (int i = 0; i < 3; ++i) {
            Mat12& m = out.a[1 + i];
            for (int j = 0; j < 3; ++j) m(i + 3 * j, i + 3 * j) = 1.0;
            for (int k = 0; k < 3; ++k)
                if (k != i) m(9 + k, 9 + k) = -1.0;
        }

        // cross-row constraints: h5 (rows 1,3 / t1 t3), h6 (rows 2,3 / t2 t3),
        // h7 (rows 1,2 / t1 t2)
        auto cross_constraint = [](Mat12& m, int r1, int r2) {
            for (int j = 0; j < 3; ++j) {
                m(r1 + 3 * j, r2 + 3 * j) = 0.5;
                m(r2 + 3 * j, r1 + 3 * j) = 0.5;
            }
            m(9 + r1, 9 + r2) = 0.5;
            m(9 + r2, 9 + r1) = 0.5;
        };
        cross_constraint(out.a[4], 0, 2);
        cross_constraint(out.a[5], 1, 2);
        cross_constraint(out.a[6], 0, 1);
        return out;
    }();
    return cm;
}

/// The six constraints kept in the relaxation that drops h_{dropped}:
/// h1 first, then the remaining five in ascending order.
inline std::array<int, 6> retained_constraints(int dropped) {
    if (dropped < 2 || dropped > 7)
        throw std::invalid_argument("retained_constraints: dropped index must be in 2..7");
    std::array<int, 6> kept{};
    int n = 0;
    kept[n++] = 1;
    for (int k = 2; k <= 7; ++k)
        if (k != dropped) kept[n++] = k;
    return kept;
}

/// Jacobian of the retained constraints at x: column k is A_{sigma(k)} x
/// (half the constraint gradient).
inline Eigen::Matrix<double, 12, 6> build_jacobian(const Vec12& x, int dropped) {
    const auto& cm = constraint_matrices();
    const auto kept = retained_constraints(dropped);
    Eigen::Matrix<double, 12, 6> j;
    for (int k = 0; k < 6; ++k) j.col(k) = cm.a[kept[k] - 1] * x;
    return j;
}

struct DualCandidate {
    Eigen::Matrix<double, 6, 1> lambda;
    int dropped_constraint = 7;
    double residual = 0.0;
};

struct RankDeficientJacobian : std::runtime_error {
    int dropped_constraint;
    explicit RankDeficientJacobian(int dropped)
        : std::runtime_error("dual candidate: rank-deficient constraint Jacobian"),
          dropped_constraint(dropped) {}
};

/// Least-squares solution of J(x) lambda = Q x; the dual objective is lambda_1.
inline DualCandidate solve_dual_candidate(const Mat12& q, const Vec12& x, int dropped) {
    Eigen::Matrix<double, 12, 6> j = build_jacobian(x, dropped);
    Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 12, 6>> qr(j);
    if (qr.rank() < 6) throw RankDeficientJacobian(dropped);
    DualCandidate cand;
    cand.dropped_constraint = dropped;
    Vec12 qx = q * x;
    cand.lambda = qr.solve(qx);
    cand.residual = (j * cand.lambda - qx).norm();
    return cand;
}

/// Diagonal blocks of M(lambda) = Q - sum lambda_i A_i. The E-t coupling is
/// structurally zero for this constraint family; checked at build time.
inline std::pair<Mat9, Mat3> hessian_of_lagrangian(const Mat12& q, const DualCandidate& cand) {
    const auto& cm = constraint_matrices();
    const auto kept = retained_constraints(cand.dropped_constraint);
    Mat12 m = q;
    for (int k = 0; k < 6; ++k) m -= cand.lambda(k) * cm.a[kept[k] - 1];
    if (m.block<9, 3>(0, 9).cwiseAbs().maxCoeff() >
        1e-14 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw std::logic_error("hessian_of_lagrangian: nonzero E-t coupling block");
    return {m.topLeftCorner<9, 9>(), m.bottomRightCorner<3, 3>()};
}

/// Closed-form (trigonometric) smallest eigenvalue of a symmetric 3x3 matrix.
inline double min_eigenvalue_sym3(const Mat3& m) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, m.norm()))
        throw std::invalid_argument("min_eigenvalue_sym3: asymmetric input");
    double p1 = m(0, 1) * m(0, 1) + m(0, 2) * m(0, 2) + m(1, 2) * m(1, 2);
    if (p1 == 0.0) return m.diagonal().minCoeff();
    double q = m.trace() / 3.0;
    double p2 = (m(0, 0) - q) * (m(0, 0) - q) + (m(1, 1) - q) * (m(1, 1) - q) +
                (m(2, 2) - q) * (m(2, 2) - q) + 2.0 * p1;
    double p = std::sqrt(p2 / 6.0);
    Mat3 b = (m - q * Mat3::Identity()) / p;
    double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
    double phi = std::acos(r) / 3.0;
    return q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
}

inline double min_eigenvalue_sym9(const Mat9& m) {
    Eigen::SelfAdjointEigenSolver<Mat9> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0);
}

enum class CertificateStatus { Optimal, Unknown };

struct Certificate {
    CertificateStatus status = CertificateStatus::Unknown;
    std::optional<int> relaxation_used;  // 1-based index into the tried ordering
    double dual_value = 0.0;
    double primal_value = 0.0;
    double gap = 0.0;
    double mu_t = 0.0;
    double mu_e = 0.0;
    int relaxations_tried = 0;
};

struct CertifierOptions {
    int max_relaxations = 6;
    double tau_mu = -0.02;
    double tau_gap = 1e-14;
    bool relative_gap = true;  // threshold tau_gap * (1 + f) instead of absolute
};

/// Family of six one-constraint-drop certifiers, tried in the order
/// drop-h7, drop-h2 ... drop-h6; first feasible dual candidate certifies.
inline Certificate certify(const DataMatrix& c, const RelativePose& pose,
                           const CertifierOptions& opts = {}) {
    if (opts.max_relaxations < 1 || opts.max_relaxations > 6)
        throw std::invalid_argument("certify: max_relaxations must be in 1..6");
    static constexpr std::array<int, 6> kDropOrder = {7, 2, 3, 4, 5, 6};

    Mat12 q = c.padded();
    Vec12 x = pose.stacked();
    double f = x.dot(q * x);
    double qx_norm = (q * x).norm();
    const double gap_tol = opts.relative_gap ? opts.tau_gap * (1.0 + f) : opts.tau_gap;

    Certificate cert;
    cert.primal_value = f;
    for (int idx = 0; idx < opts.max_relaxations; ++idx) {
        ++cert.relaxations_tried;
        DualCandidate cand;
        try {
            cand = solve_dual_candidate(q, x, kDropOrder[idx]);
        } catch (const RankDeficientJacobian&) {
            continue;
        }
        if (cand.residual > 1e-8 * std::max(qx_norm, 1e-12 * (1.0 + f))) continue;

        auto [block_e, block_t] = hessian_of_lagrangian(q, cand);
        cert.dual_value = cand.lambda(0);
        cert.gap = f - cert.dual_value;
        cert.mu_t = min_eigenvalue_sym3(block_t);
        if (cert.mu_t <= opts.tau_mu || std::abs(cert.gap) > gap_tol) continue;
        cert.mu_e = min_eigenvalue_sym9(block_e);
        if (cert.mu_e <= opts.tau_mu || std::abs(cert.gap) > gap_tol) continue;

        cert.status = CertificateStatus::Optimal;
        cert.relaxation_used = idx + 1;
        break;
    }
    return cert;
}

}  // namespace certpose
