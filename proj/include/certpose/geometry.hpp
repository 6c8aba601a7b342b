#pragma once

#include "certpose/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <array>
#include <stdexcept>

namespace certpose {

/// Skew-symmetric matrix [t]x with t x v = cross_matrix(t) * v.
inline Mat3 cross_matrix(const Vec3& t) {
    Mat3 m;
    m << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
    return m;
}

inline EssentialMatrix essential_from_pose(const RelativePose& pose) {
    return EssentialMatrix(cross_matrix(pose.translation.v) * pose.rotation.m);
}

inline Vec12 RelativePose::stacked() const {
    Vec12 x;
    x.head<9>() = essential_from_pose(*this).vec();
    x.tail<3>() = translation.v;
    return x;
}

/// Normalized algebraic (epipolar) error f^T E f'.
inline double epipolar_residual(const EssentialMatrix& e, const BearingPair& pair) {
    return pair.f.dot(e.m * pair.f_prime);
}

inline DataMatrix build_data_matrix(const CorrespondenceSet& corr) {
    corr.validate();
    Mat9 c = Mat9::Zero();
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const auto& p = corr.pairs[i];
        Vec9 k;
        // f' kron f, column blocks scaled by entries of f'.
        for (int j = 0; j < 3; ++j) k.segment<3>(3 * j) = p.f_prime(j) * p.f;
        c.noalias() += corr.weight(i) * k * k.transpose();
    }
    return DataMatrix(c, corr.size());
}

inline double cost(const DataMatrix& c, const EssentialMatrix& e) {
    Vec9 v = e.vec();
    return v.dot(c.c * v);
}

/// Closest normalized essential matrix in Frobenius norm: SVD projection onto
/// singular values (1, 1, 0) with det-corrected factors.
inline EssentialMatrix project_to_essential(const Mat3& m) {
    if (m.norm() == 0.0)
        throw std::invalid_argument("project_to_essential: zero matrix");
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    if (u.determinant() < 0) u.col(2) *= -1;
    if (v.determinant() < 0) v.col(2) *= -1;
    return EssentialMatrix(u * Vec3(1, 1, 0).asDiagonal() * v.transpose());
}

struct EightPointResult {
    EssentialMatrix essential;
    bool degenerate = false;  // data matrix rank below 8
};

/// DLT over all N correspondences: smallest eigenvector of C, reshaped and
/// projected onto the essential manifold. Deterministic sign: first nonzero
/// entry of the eigenvector made positive.
inline EightPointResult initialize_eight_point(const CorrespondenceSet& corr) {
    if (corr.size() < 8)
        throw std::invalid_argument("initialize_eight_point: at least 8 correspondences required");
    DataMatrix c = build_data_matrix(corr);
    Eigen::SelfAdjointEigenSolver<Mat9> eig(c.c);
    Vec9 v = eig.eigenvectors().col(0);
    for (int i = 0; i < 9; ++i) {
        if (v(i) != 0.0) {
            if (v(i) < 0.0) v = -v;
            break;
        }
    }
    EightPointResult res;
    // rank of C below 8 leaves a >1-dimensional null space: flag, still solve
    const double scale = eig.eigenvalues()(8);
    int rank = 0;
    for (int i = 0; i < 9; ++i)
        if (eig.eigenvalues()(i) > 1e-12 * std::max(scale, 1.0)) ++rank;
    res.degenerate = rank < 8;
    res.essential = project_to_essential(Eigen::Map<const Mat3>(v.data()));
    return res;
}

struct PoseFromEssentialResult {
    RelativePose pose;
    bool degenerate = false;  // cheirality could not disambiguate
};

namespace detail {

/// Midpoint triangulation depths for a correspondence under pose (R, t):
/// rays are d1*f from the first center and t + d2*R*f' from the second,
/// with X_cam1 = R X_cam2 + t.
inline bool positive_depths(const RelativePose& pose, const BearingPair& pair) {
    Vec3 d2dir = pose.rotation.m * pair.f_prime;
    // Least-squares depths of the closest points on the two rays.
    double a = 1.0, b = pair.f.dot(d2dir), c = 1.0;
    double d = pair.f.dot(pose.translation.v), e = d2dir.dot(pose.translation.v);
    double den = a * c - b * b;
    if (std::abs(den) < 1e-14) return false;
    double depth1 = (c * d - b * e) / den;
    double depth2 = (b * d - a * e) / den;
    return depth1 > 0 && depth2 > 0;
}

}  // namespace detail

/// Decompose E into the four (R, t) candidates and pick the one with the most
/// correspondences triangulating to positive depth in both views.
inline PoseFromEssentialResult pose_from_essential(const EssentialMatrix& e,
                                                   const CorrespondenceSet& corr) {
    corr.validate();
    Eigen::JacobiSVD<Mat3> svd(e.m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    if (u.determinant() < 0) u.col(2) *= -1;
    if (v.determinant() < 0) v.col(2) *= -1;
    Mat3 w;
    w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    std::array<RelativePose, 4> candidates = {
        RelativePose(RotationMatrix(u * w * v.transpose()), TranslationDirection(u.col(2))),
        RelativePose(RotationMatrix(u * w * v.transpose()), TranslationDirection(-u.col(2))),
        RelativePose(RotationMatrix(u * w.transpose() * v.transpose()),
                     TranslationDirection(u.col(2))),
        RelativePose(RotationMatrix(u * w.transpose() * v.transpose()),
                     TranslationDirection(-u.col(2)))};

    int best = 0, best_support = -1;
    for (int k = 0; k < 4; ++k) {
        int support = 0;
        for (const auto& pair : corr.pairs)
            if (detail::positive_depths(candidates[k], pair)) ++support;
        if (support > best_support) {
            best_support = support;
            best = k;
        }
    }
    PoseFromEssentialResult res;
    res.pose = candidates[best];
    res.degenerate = best_support <= 0;
    return res;
}

}  // namespace certpose
