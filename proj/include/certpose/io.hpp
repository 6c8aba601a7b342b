#pragma once

#include "certpose/certifier.hpp"
#include "certpose/gnc.hpp"
#include "certpose/synthetic.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace certpose {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parse "fx fy fz fpx fpy fpz" lines; '#'-prefixed lines and blank lines are
/// ignored. Vectors must already be unit within 1e-6 and are renormalized.
inline CorrespondenceSet parse_correspondences(std::istream& in) {
    CorrespondenceSet corr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        double v[6];
        for (int k = 0; k < 6; ++k)
            if (!(ls >> v[k]))
                throw ParseError("line " + std::to_string(line_no) +
                                 ": expected 6 numeric fields");
        std::string extra;
        if (ls >> extra)
            throw ParseError("line " + std::to_string(line_no) + ": trailing content");
        Vec3 f(v[0], v[1], v[2]);
        Vec3 fp(v[3], v[4], v[5]);
        if (std::abs(f.norm() - 1.0) > 1e-6 || std::abs(fp.norm() - 1.0) > 1e-6)
            throw ParseError("line " + std::to_string(line_no) +
                             ": bearing vector not unit within 1e-6");
        corr.pairs.emplace_back(f.normalized(), fp.normalized());
    }
    return corr;
}

inline CorrespondenceSet read_correspondence_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path);
    return parse_correspondences(in);
}

struct TimingBreakdown {
    double init_us = 0.0;
    double refine_us = 0.0;
    double certify_us = 0.0;
    double total_us = 0.0;
};

struct RobustBlock {
    std::vector<double> weights;
    std::vector<std::size_t> inlier_indices;
    bool is_valid = false;
};

struct ResultDocument {
    int schema_version = 1;
    RelativePose pose;
    EssentialMatrix essential;
    double cost = 0.0;
    Certificate certificate;
    std::optional<RobustBlock> robust;
    TimingBreakdown timing;
};

inline nlohmann::ordered_json to_json(const ResultDocument& doc) {
    nlohmann::ordered_json j;
    j["schema_version"] = doc.schema_version;
    std::vector<double> rot(9);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) rot[3 * i + k] = doc.pose.rotation.m(i, k);
    j["pose"]["rotation"] = rot;
    j["pose"]["translation"] = {doc.pose.translation.v.x(), doc.pose.translation.v.y(),
                                doc.pose.translation.v.z()};
    std::vector<double> ess(9);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) ess[3 * i + k] = doc.essential.m(i, k);
    j["essential"] = ess;
    j["cost"] = doc.cost;
    j["certificate"]["status"] =
        doc.certificate.status == CertificateStatus::Optimal ? "optimal" : "unknown";
    j["certificate"]["gap"] = doc.certificate.gap;
    j["certificate"]["mu_t"] = doc.certificate.mu_t;
    j["certificate"]["mu_e"] = doc.certificate.mu_e;
    j["certificate"]["relaxations_tried"] = doc.certificate.relaxations_tried;
    j["certificate"]["dual_value"] = doc.certificate.dual_value;
    if (doc.robust) {
        j["robust"]["weights"] = doc.robust->weights;
        j["robust"]["inlier_indices"] = doc.robust->inlier_indices;
        j["robust"]["is_valid"] = doc.robust->is_valid;
    }
    j["timing"]["init_us"] = doc.timing.init_us;
    j["timing"]["refine_us"] = doc.timing.refine_us;
    j["timing"]["certify_us"] = doc.timing.certify_us;
    j["timing"]["total_us"] = doc.timing.total_us;
    return j;
}

inline std::string serialize_json(const ResultDocument& doc) {
    return to_json(doc).dump(2) + "\n";
}

inline ResultDocument parse_result_json(const std::string& text) {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(text);
    ResultDocument doc;
    doc.schema_version = j.at("schema_version").get<int>();
    Mat3 r;
    const auto& rot = j.at("pose").at("rotation");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r(i, k) = rot.at(3 * i + k).get<double>();
    const auto& tr = j.at("pose").at("translation");
    Vec3 t(tr.at(0).get<double>(), tr.at(1).get<double>(), tr.at(2).get<double>());
    doc.pose = RelativePose(RotationMatrix(r), TranslationDirection(t));
    Mat3 e;
    const auto& ess = j.at("essential");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) e(i, k) = ess.at(3 * i + k).get<double>();
    doc.essential.m = e;
    doc.cost = j.at("cost").get<double>();
    const auto& cert = j.at("certificate");
    doc.certificate.status = cert.at("status").get<std::string>() == "optimal"
                                 ? CertificateStatus::Optimal
                                 : CertificateStatus::Unknown;
    doc.certificate.gap = cert.at("gap").get<double>();
    doc.certificate.mu_t = cert.at("mu_t").get<double>();
    doc.certificate.mu_e = cert.at("mu_e").get<double>();
    doc.certificate.relaxations_tried = cert.at("relaxations_tried").get<int>();
    doc.certificate.dual_value = cert.at("dual_value").get<double>();
    if (j.contains("robust")) {
        RobustBlock rb;
        rb.weights = j.at("robust").at("weights").get<std::vector<double>>();
        rb.inlier_indices =
            j.at("robust").at("inlier_indices").get<std::vector<std::size_t>>();
        rb.is_valid = j.at("robust").at("is_valid").get<bool>();
        doc.robust = std::move(rb);
    }
    doc.timing.init_us = j.at("timing").at("init_us").get<double>();
    doc.timing.refine_us = j.at("timing").at("refine_us").get<double>();
    doc.timing.certify_us = j.at("timing").at("certify_us").get<double>();
    doc.timing.total_us = j.at("timing").at("total_us").get<double>();
    return doc;
}

namespace detail {

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

/// Single-row CSV rendering of a ResultDocument (header + one data row).
inline std::string serialize_csv(const ResultDocument& doc) {
    std::ostringstream os;
    os << "schema_version,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,cost,"
          "status,gap,mu_t,mu_e,relaxations_tried,dual_value,"
          "init_us,refine_us,certify_us,total_us\n";
    os << doc.schema_version;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) os << ',' << detail::fmt_double(doc.pose.rotation.m(i, k));
    for (int k = 0; k < 3; ++k) os << ',' << detail::fmt_double(doc.pose.translation.v(k));
    os << ',' << detail::fmt_double(doc.cost);
    os << ',' << (doc.certificate.status == CertificateStatus::Optimal ? "optimal" : "unknown");
    os << ',' << detail::fmt_double(doc.certificate.gap);
    os << ',' << detail::fmt_double(doc.certificate.mu_t);
    os << ',' << detail::fmt_double(doc.certificate.mu_e);
    os << ',' << doc.certificate.relaxations_tried;
    os << ',' << detail::fmt_double(doc.certificate.dual_value);
    os << ',' << detail::fmt_double(doc.timing.init_us);
    os << ',' << detail::fmt_double(doc.timing.refine_us);
    os << ',' << detail::fmt_double(doc.timing.certify_us);
    os << ',' << detail::fmt_double(doc.timing.total_us);
    os << '\n';
    return os.str();
}

inline const char* benchmark_csv_header(bool ab_precondition = false) {
    return ab_precondition
               ? "seed,n,noise_px,fov_deg,parallax_m,focal_px,outlier_frac,rot_err_deg,"
                 "trans_err_deg,cost,certified,relaxations_tried,outer_iters,inner_iters,"
                 "time_us,inner_iters_noprecond,time_us_noprecond"
               : "seed,n,noise_px,fov_deg,parallax_m,focal_px,outlier_frac,rot_err_deg,"
                 "trans_err_deg,cost,certified,relaxations_tried,outer_iters,inner_iters,"
                 "time_us";
}

inline std::string benchmark_csv_row(const TrialRecord& rec) {
    std::ostringstream os;
    os << rec.seed << ',' << rec.n << ',' << detail::fmt_double(rec.noise_px) << ','
       << detail::fmt_double(rec.fov_deg) << ',' << detail::fmt_double(rec.parallax_m) << ','
       << detail::fmt_double(rec.focal_px) << ',' << detail::fmt_double(rec.outlier_frac)
       << ',' << detail::fmt_double(rec.rot_err_deg) << ','
       << detail::fmt_double(rec.trans_err_deg) << ',' << detail::fmt_double(rec.cost) << ','
       << (rec.certified ? 1 : 0) << ',' << rec.relaxations_tried << ',' << rec.outer_iters
       << ',' << rec.inner_iters << ',' << detail::fmt_double(rec.time_us);
    return os.str();
}

}  // namespace certpose
