#pragma once

#include "certpose/geometry.hpp"
#include "certpose/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace certpose {

/// Tangent vector of SO(3) x S^2 in ambient coordinates.
struct ProductTangent {
    Mat3 omega_r = Mat3::Zero();
    Vec3 delta_t = Vec3::Zero();

    static ProductTangent Zero() { return {}; }

    ProductTangent operator+(const ProductTangent& o) const {
        return {omega_r + o.omega_r, delta_t + o.delta_t};
    }
    ProductTangent operator-(const ProductTangent& o) const {
        return {omega_r - o.omega_r, delta_t - o.delta_t};
    }
    ProductTangent operator*(double s) const { return {omega_r * s, delta_t * s}; }

    double dot(const ProductTangent& o) const {
        return (omega_r.array() * o.omega_r.array()).sum() + delta_t.dot(o.delta_t);
    }
    double squaredNorm() const { return dot(*this); }
    double norm() const { return std::sqrt(squaredNorm()); }
};

inline Mat3 skew_part(const Mat3& a) { return 0.5 * (a - a.transpose()); }
inline Mat3 sym_part(const Mat3& a) { return 0.5 * (a + a.transpose()); }

/// Proj_R(X) = R skew(R^T X).
inline Mat3 proj_rotation_tangent(const RotationMatrix& r, const Mat3& x) {
    return r.m * skew_part(r.m.transpose() * x);
}

/// Proj_t(x) = x - (t^T x) t.
inline Vec3 proj_sphere_tangent(const TranslationDirection& t, const Vec3& x) {
    return x - t.v.dot(x) * t.v;
}

inline ProductTangent project_tangent(const RelativePose& pose, const ProductTangent& v) {
    return {proj_rotation_tangent(pose.rotation, v.omega_r),
            proj_sphere_tangent(pose.translation, v.delta_t)};
}

namespace detail {

/// I3 kron [t]x, mapping vec(R) -> vec([t]x R).
inline Mat9 i3_kron_cross(const Vec3& t) {
    Mat9 m = Mat9::Zero();
    Mat3 tx = cross_matrix(t);
    for (int j = 0; j < 3; ++j) m.block<3, 3>(3 * j, 3 * j) = tx;
    return m;
}

/// (R^T kron I3) B, mapping t -> vec([t]x R). Row-block i is -[r_i]x with r_i
/// the i-th column of R.
inline Mat93 translation_factor(const Mat3& r) {
    Mat93 m;
    for (int i = 0; i < 3; ++i) m.block<3, 3>(3 * i, 0) = -cross_matrix(r.col(i));
    return m;
}

}  // namespace detail

/// Quadratic model of the cost at a fixed pose: f = 1/2 r^T m_r r = 1/2 t^T m_t t,
/// cross-term m_tr = d(m_r r)/dt. Immutable snapshot; rebuild after every step.
struct CostMatrices {
    Mat9 m_r;
    Eigen::Matrix3d m_t;
    Mat93 m_tr;
};

inline CostMatrices build_cost_matrices(const DataMatrix& c, const RelativePose& pose) {
    CostMatrices cm;
    Mat9 tt = detail::i3_kron_cross(pose.translation.v);
    Mat93 rt = detail::translation_factor(pose.rotation.m);
    cm.m_r = tt.transpose() * c.c * tt;
    cm.m_t = rt.transpose() * c.c * rt;
    // d(grad_r)/dt: grad_r = T(t)^T C e with e = R~ t bilinear in (r, t).
    Vec9 ce = c.c * tt * Eigen::Map<const Vec9>(pose.rotation.m.data());
    cm.m_tr = tt.transpose() * c.c * rt;
    for (int j = 0; j < 3; ++j) {
        Mat9 dT = detail::i3_kron_cross(Vec3::Unit(j));
        cm.m_tr.col(j) += dT.transpose() * ce;
    }
    return cm;
}

/// Gradient of 1/2 vec(E)^T C vec(E) as a free function of (R, t): (m_r r ; m_t t).
inline Vec12 euclidean_gradient(const CostMatrices& cm, const RelativePose& pose) {
    Vec12 g;
    g.head<9>() = cm.m_r * Eigen::Map<const Vec9>(pose.rotation.m.data());
    g.tail<3>() = cm.m_t * pose.translation.v;
    return g;
}

/// Block Hessian action [m_r, m_tr; m_tr^T, m_t] (r_dot; t_dot).
inline Vec12 euclidean_hessian_vp(const CostMatrices& cm, const ProductTangent& v) {
    Vec9 rdot = Eigen::Map<const Vec9>(v.omega_r.data());
    Vec12 h;
    h.head<9>() = cm.m_r * rdot + cm.m_tr * v.delta_t;
    h.tail<3>() = cm.m_tr.transpose() * rdot + cm.m_t * v.delta_t;
    return h;
}

inline ProductTangent riemannian_gradient(const CostMatrices& cm, const RelativePose& pose) {
    Vec12 g = euclidean_gradient(cm, pose);
    ProductTangent out;
    out.omega_r = proj_rotation_tangent(pose.rotation, Eigen::Map<const Mat3>(g.data()));
    out.delta_t = proj_sphere_tangent(pose.translation, g.tail<3>());
    return out;
}

/// Riemannian Hessian-vector product on the embedded product manifold; the
/// rotation block carries the -v^T sym(R grad) curvature correction and the
/// sphere block the -(t^T grad_t) v correction.
inline ProductTangent riemannian_hessian_vp(const CostMatrices& cm, const RelativePose& pose,
                                            const ProductTangent& v) {
    Vec12 g = euclidean_gradient(cm, pose);
    Vec12 h = euclidean_hessian_vp(cm, v);
    Mat3 egrad_r = Eigen::Map<const Mat3>(g.data());
    Mat3 ehess_r = Eigen::Map<const Mat3>(h.data());

    ProductTangent out;
    out.omega_r = proj_rotation_tangent(
        pose.rotation, ehess_r - v.omega_r * sym_part(pose.rotation.m.transpose() * egrad_r));
    out.delta_t = proj_sphere_tangent(pose.translation, h.tail<3>()) -
                  pose.translation.v.dot(g.tail<3>()) * v.delta_t;
    return out;
}

namespace detail {

/// Rodrigues' formula.
inline Mat3 so3_exp(const Vec3& w) {
    double theta = w.norm();
    Mat3 wx = cross_matrix(w);
    if (theta < 1e-12) return Mat3::Identity() + wx + 0.5 * wx * wx;
    return Mat3::Identity() + std::sin(theta) / theta * wx +
           (1.0 - std::cos(theta)) / (theta * theta) * wx * wx;
}

}  // namespace detail

/// Exponential map on SO(3), metric projection on S^2; retract(p, 0) = p.
inline RelativePose retract(const RelativePose& pose, const ProductTangent& v) {
    if (v.omega_r.isZero(0.0) && v.delta_t.isZero(0.0)) return pose;
    Mat3 body = skew_part(pose.rotation.m.transpose() * v.omega_r);
    Vec3 w(body(2, 1), body(0, 2), body(1, 0));
    Mat3 r = pose.rotation.m * detail::so3_exp(w);
    // re-orthonormalize to keep invariants tight over many steps
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) r = -r;

    Vec3 t = pose.translation.v + v.delta_t;
    double n = t.norm();
    if (n == 0.0)
        throw std::invalid_argument("retract: antipodal translation step");
    return RelativePose(RotationMatrix(r), TranslationDirection(t / n));
}

/// Jacobi-like preconditioner scale: sum of the three largest eigenvalues of C.
inline double preconditioner_alpha(const DataMatrix& c) {
    if (c.c.norm() == 0.0)
        throw std::invalid_argument("preconditioner_alpha: zero data matrix");
    Eigen::SelfAdjointEigenSolver<Mat9> eig(c.c, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    return ev(8) + ev(7) + ev(6);
}

}  // namespace certpose
