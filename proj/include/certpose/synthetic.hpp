#pragma once

#include "certpose/gnc.hpp"
#include "certpose/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace certpose {

struct SceneParams {
    std::size_t n_points = 100;
    double fov_deg = 100.0;
    double max_parallax_m = 2.0;
    double focal_px = 800.0;
    double noise_px = 0.5;
    double depth_min_m = 1.0;
    double depth_max_m = 8.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_points < 1 || fov_deg <= 0.0 || fov_deg >= 180.0 || depth_min_m <= 0.0 ||
            depth_max_m <= depth_min_m)
            throw std::invalid_argument("SceneParams: invalid parameters");
    }
};

struct ProblemInstance {
    CorrespondenceSet corr;
    RelativePose gt_pose;
    std::vector<bool> outlier_mask;
};

namespace detail {

/// SplitMix64 stream mixer so that (seed, cell, trial) derive independent,
/// order-insensitive RNG streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto splitmix = [](std::uint64_t& s) {
        s += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    std::uint64_t s = a;
    std::uint64_t h = splitmix(s);
    s ^= b * 0xff51afd7ed558ccdull;
    h ^= splitmix(s);
    s ^= c * 0xc4ceb9fe1a85ec53ull;
    h ^= splitmix(s);
    return h;
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
    // uniform (Haar) via quaternion sampling
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline Vec3 random_unit_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    while (v.norm() < 1e-8) v = Vec3(gauss(rng), gauss(rng), gauss(rng));
    return v.normalized();
}

inline bool in_fov(const Vec3& dir_unit, double cos_half_fov) {
    return dir_unit.z() > 0 && dir_unit.z() >= cos_half_fov;
}

/// Uniform perturbation in the tangent plane of a unit bearing vector,
/// magnitude in [0, sqrt(3) * sigma_rad] so the RMS angle is sigma_rad.
inline Vec3 perturb_bearing(const Vec3& f, double sigma_rad, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Vec3 a = std::abs(f.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    Vec3 u = f.cross(a).normalized();
    Vec3 v = f.cross(u);
    double phi = 2.0 * M_PI * uni(rng);
    double mag = std::sqrt(3.0) * sigma_rad * uni(rng);
    // draws happen unconditionally so a seed yields the same geometry at
    // every noise level
    if (sigma_rad == 0.0) return f;
    return (f + mag * (std::cos(phi) * u + std::sin(phi) * v)).normalized();
}

}  // namespace detail

/// Random two-view scene: camera 1 at identity, 3D points uniform in its
/// depth-bounded viewing frustum, camera 2 at a random pose with all points
/// inside both fields of view (rejection sampling). Convention:
/// X_cam1 = R X_cam2 + t, so E = [t]x R satisfies f^T E f' = 0.
inline ProblemInstance generate_scene(const SceneParams& p) {
    p.validate();
    std::mt19937_64 rng(detail::mix_seed(p.seed, 0x5ce4e5, 0));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double half_fov = 0.5 * p.fov_deg * M_PI / 180.0;
    const double cos_half_fov = std::cos(half_fov);
    const double tan_half_fov = std::tan(half_fov);
    const double sigma_rad = p.noise_px / p.focal_px;

    for (int pose_attempt = 0; pose_attempt < 50; ++pose_attempt) {
        Mat3 r = detail::random_rotation(rng);
        double parallax = p.max_parallax_m * uni(rng);
        Vec3 t = parallax * detail::random_unit_vector(rng);

        ProblemInstance inst;
        double t_norm = t.norm();
        inst.gt_pose = RelativePose(RotationMatrix(r),
                                    TranslationDirection(t_norm > 1e-12 ? Vec3(t / t_norm)
                                                                        : Vec3::UnitZ()));
        inst.outlier_mask.assign(p.n_points, false);

        bool pose_ok = true;
        for (std::size_t i = 0; i < p.n_points && pose_ok; ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < 100; ++attempt) {
                double depth = p.depth_min_m + (p.depth_max_m - p.depth_min_m) * uni(rng);
                double x = (2.0 * uni(rng) - 1.0) * depth * tan_half_fov;
                double y = (2.0 * uni(rng) - 1.0) * depth * tan_half_fov;
                Vec3 point(x, y, depth);
                Vec3 f = point.normalized();
                if (!detail::in_fov(f, cos_half_fov)) continue;
                Vec3 point_cam2 = r.transpose() * (point - t);
                if (point_cam2.norm() < 1e-6) continue;
                Vec3 fp = point_cam2.normalized();
                if (!detail::in_fov(fp, cos_half_fov)) continue;
                f = detail::perturb_bearing(f, sigma_rad, rng);
                fp = detail::perturb_bearing(fp, sigma_rad, rng);
                inst.corr.pairs.emplace_back(f, fp);
                placed = true;
                break;
            }
            if (!placed) pose_ok = false;
        }
        if (pose_ok) return inst;
    }
    throw std::runtime_error("generate_scene: rejection sampling budget exhausted");
}

/// Replace f' of floor(fraction * N) randomly chosen pairs by a uniform
/// random unit vector; first-frame vectors and ground truth are untouched.
inline ProblemInstance inject_outliers(const ProblemInstance& inst, double fraction,
                                       std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("inject_outliers: fraction outside [0,1]");
    ProblemInstance out = inst;
    const std::size_t n = inst.corr.size();
    const std::size_t n_out = static_cast<std::size_t>(fraction * static_cast<double>(n));
    std::mt19937_64 rng(detail::mix_seed(seed, 0x071e5, 1));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(idx[i - 1], idx[pick(rng)]);
    }
    for (std::size_t k = 0; k < n_out; ++k) {
        out.corr.pairs[idx[k]].f_prime = detail::random_unit_vector(rng);
        out.outlier_mask[idx[k]] = true;
    }
    return out;
}

/// Geodesic rotation distance in degrees.
inline double rotation_error_deg(const RotationMatrix& est, const RotationMatrix& gt) {
    double c = ((gt.m.transpose() * est.m).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI;
}

/// Angle between translation directions, folded over the sign ambiguity.
inline double translation_error_deg(const TranslationDirection& est,
                                    const TranslationDirection& gt) {
    double c = std::clamp(std::abs(est.v.dot(gt.v)), 0.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

enum class PipelineKind { Plain, Robust };

struct TrialRecord {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    double noise_px = 0.0;
    double fov_deg = 0.0;
    double parallax_m = 0.0;
    double focal_px = 0.0;
    double outlier_frac = 0.0;
    double rot_err_deg = 0.0;
    double trans_err_deg = 0.0;
    double cost = 0.0;
    bool certified = false;
    int relaxations_tried = 0;
    int outer_iters = 0;
    int inner_iters = 0;
    double time_us = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepCell {
    SceneParams params;
    double outlier_frac = 0.0;
};

/// One record per (cell, trial); RNG stream derived from (seed, cell, trial)
/// so serial and parallel execution produce identical tables.
inline TrialRecord run_trial(const SweepCell& cell, std::uint64_t base_seed,
                             std::size_t cell_idx, std::size_t trial_idx, PipelineKind kind,
                             const SolverOptions& solver_opts = {}) {
    TrialRecord rec;
    SceneParams p = cell.params;
    p.seed = detail::mix_seed(base_seed, cell_idx + 1, trial_idx + 1);
    rec.seed = p.seed;
    rec.n = p.n_points;
    rec.noise_px = p.noise_px;
    rec.fov_deg = p.fov_deg;
    rec.parallax_m = p.max_parallax_m;
    rec.focal_px = p.focal_px;
    rec.outlier_frac = cell.outlier_frac;
    try {
        ProblemInstance inst = generate_scene(p);
        if (cell.outlier_frac > 0.0) inst = inject_outliers(inst, cell.outlier_frac, p.seed);

        auto t0 = std::chrono::steady_clock::now();
        RelativePose pose;
        if (kind == PipelineKind::Plain) {
            auto [report, cert] = estimate(inst.corr, solver_opts);
            pose = report.pose;
            rec.cost = report.final_cost;
            rec.certified = cert.status == CertificateStatus::Optimal;
            rec.relaxations_tried = cert.relaxations_tried;
            rec.outer_iters = report.outer_iters;
            rec.inner_iters = report.total_inner_iters;
        } else {
            RobustResult rr = robust_estimate(inst.corr, {}, std::nullopt, solver_opts);
            pose = rr.pose;
            rec.cost = cost(build_data_matrix(inst.corr), essential_from_pose(rr.pose));
            rec.certified = rr.certificate &&
                            rr.certificate->status == CertificateStatus::Optimal;
            rec.relaxations_tried = rr.certificate ? rr.certificate->relaxations_tried : 0;
            rec.outer_iters = rr.outer_iters;
            if (!rr.is_valid) {
                rec.failed = true;
                rec.error = rr.diagnostic;
            }
        }
        auto t1 = std::chrono::steady_clock::now();
        rec.time_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
        rec.rot_err_deg = rotation_error_deg(pose.rotation, inst.gt_pose.rotation);
        rec.trans_err_deg = translation_error_deg(pose.translation, inst.gt_pose.translation);
    } catch (const std::exception& ex) {
        rec.failed = true;
        rec.error = ex.what();
    }
    return rec;
}

inline std::vector<TrialRecord> run_sweep(const std::vector<SweepCell>& grid,
                                          std::size_t trials_per_cell, PipelineKind kind,
                                          std::uint64_t seed,
                                          const SolverOptions& solver_opts = {}) {
    std::vector<TrialRecord> records;
    records.reserve(grid.size() * trials_per_cell);
    for (std::size_t c = 0; c < grid.size(); ++c)
        for (std::size_t t = 0; t < trials_per_cell; ++t)
            records.push_back(run_trial(grid[c], seed, c, t, kind, solver_opts));
    return records;
}

}  // namespace certpose
