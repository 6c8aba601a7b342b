#pragma once

#include "certpose/certifier.hpp"
#include "certpose/solver.hpp"

#include <utility>

namespace certpose {

/// Full pipeline: eight-point initialization, trust-region refinement,
/// a-posteriori optimality certification.
inline std::pair<SolveReport, Certificate> estimate(const CorrespondenceSet& corr,
                                                    const SolverOptions& opts = {},
                                                    const CertifierOptions& cert_opts = {}) {
    EightPointResult init = initialize_eight_point(corr);
    DataMatrix c = build_data_matrix(corr);
    RelativePose init_pose = pose_from_essential(init.essential, corr).pose;
    SolveReport report = refine_on_manifold(c, init_pose, opts);
    Certificate cert = certify(c, report.pose, cert_opts);
    return {std::move(report), cert};
}

}  // namespace certpose
