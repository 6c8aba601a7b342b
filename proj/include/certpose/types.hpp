#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace certpose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat93 = Eigen::Matrix<double, 9, 3>;

/// One pair of unit bearing vectors; f in the first camera frame, f_prime in
/// the second.
struct BearingPair {
    Vec3 f;
    Vec3 f_prime;

    BearingPair() : f(Vec3::UnitZ()), f_prime(Vec3::UnitZ()) {}
    BearingPair(const Vec3& f_, const Vec3& fp_) : f(f_), f_prime(fp_) {
        if (std::abs(f.norm() - 1.0) > 1e-12 || std::abs(f_prime.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("BearingPair: vectors must be unit norm");
    }
};

/// Ordered list of correspondences with optional per-pair weights in [0,1].
struct CorrespondenceSet {
    std::vector<BearingPair> pairs;
    std::optional<std::vector<double>> weights;

    std::size_t size() const { return pairs.size(); }

    double weight(std::size_t i) const { return weights ? (*weights)[i] : 1.0; }

    void validate() const {
        if (pairs.empty())
            throw std::invalid_argument("CorrespondenceSet: at least one pair required");
        if (weights) {
            if (weights->size() != pairs.size())
                throw std::invalid_argument("CorrespondenceSet: weight count mismatch");
            for (double w : *weights)
                if (w < 0.0 || w > 1.0)
                    throw std::invalid_argument("CorrespondenceSet: weights must lie in [0,1]");
        }
    }
};

struct RotationMatrix {
    Mat3 m;

    RotationMatrix() : m(Mat3::Identity()) {}
    explicit RotationMatrix(const Mat3& r) : m(r) {
        if ((m.transpose() * m - Mat3::Identity()).norm() > 1e-10 ||
            std::abs(m.determinant() - 1.0) > 1e-10)
            throw std::invalid_argument("RotationMatrix: not in SO(3)");
    }
};

struct TranslationDirection {
    Vec3 v;

    TranslationDirection() : v(Vec3::UnitZ()) {}
    explicit TranslationDirection(const Vec3& t) : v(t) {
        if (std::abs(v.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("TranslationDirection: not unit norm");
    }
};

/// Normalized essential matrix, singular values (1, 1, 0).
struct EssentialMatrix {
    Mat3 m;

    EssentialMatrix() { m << 0, -1, 0, 1, 0, 0, 0, 0, 0; }
    explicit EssentialMatrix(const Mat3& e) : m(e) {}

    Vec9 vec() const { return Eigen::Map<const Vec9>(m.data()); }
};

struct RelativePose {
    RotationMatrix rotation;
    TranslationDirection translation;

    RelativePose() = default;
    RelativePose(const RotationMatrix& r, const TranslationDirection& t)
        : rotation(r), translation(t) {}

    /// Stacked [vec(E); t] used by the certifier.
    Vec12 stacked() const;
};

/// The 9x9 PSD quadratic-cost matrix C = sum_i w_i (f'_i kron f_i)(f'_i kron f_i)^T.
struct DataMatrix {
    Mat9 c;
    std::size_t n_points = 0;

    DataMatrix() : c(Mat9::Zero()) {}
    DataMatrix(const Mat9& c_, std::size_t n) : c(c_), n_points(n) {}

    /// 12x12 zero-padded form used by the certifier.
    Mat12 padded() const {
        Mat12 q = Mat12::Zero();
        q.topLeftCorner<9, 9>() = c;
        return q;
    }

    double trace() const { return c.trace(); }
};

}  // namespace certpose
