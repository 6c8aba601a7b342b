#include "test_support.hpp"

#include "certpose/io.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace certpose;

TEST_CASE("correspondence parsing accepts comments and rejects bad lines") {
    std::istringstream good(
        "# comment line\n"
        "\n"
        "1 0 0 0 1 0\n"
        "  0 0 1   0.57735026918962584 0.57735026918962584 0.57735026918962584\n");
    CorrespondenceSet corr = parse_correspondences(good);
    REQUIRE(corr.size() == 2);
    REQUIRE((corr.pairs[0].f - Vec3::UnitX()).norm() == 0.0);
    REQUIRE(std::abs(corr.pairs[1].f_prime.norm() - 1.0) <= 1e-12);

    SECTION("short line reports its line number") {
        std::istringstream bad("1 0 0 0 1 0\n1 0 0\n");
        try {
            parse_correspondences(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }

    SECTION("non-unit vectors are rejected with a line number") {
        std::istringstream bad("2 0 0 0 1 0\n");
        try {
            parse_correspondences(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            REQUIRE(std::string(e.what()).find("line 1") != std::string::npos);
            REQUIRE(std::string(e.what()).find("unit") != std::string::npos);
        }
    }

    SECTION("trailing fields are rejected") {
        std::istringstream bad("1 0 0 0 1 0 extra\n");
        REQUIRE_THROWS_AS(parse_correspondences(bad), ParseError);
    }

    SECTION("missing file") {
        REQUIRE_THROWS_AS(read_correspondence_file("/nonexistent/file.txt"), ParseError);
    }
}

namespace {

ResultDocument sample_document() {
    std::mt19937_64 rng(1);
    ResultDocument doc;
    doc.pose = test_support::random_pose(rng);
    doc.essential = essential_from_pose(doc.pose);
    doc.cost = 1.25e-9;
    doc.certificate.status = CertificateStatus::Optimal;
    doc.certificate.gap = -3.1e-16;
    doc.certificate.mu_t = 0.5;
    doc.certificate.mu_e = 0.01;
    doc.certificate.relaxations_tried = 2;
    doc.certificate.dual_value = 1.2e-9;
    doc.timing = {12.5, 230.0, 40.25, 300.125};
    return doc;
}

}  // namespace

TEST_CASE("json round-trip is byte-identical") {
    ResultDocument doc = sample_document();

    SECTION("without robust block") {
        std::string first = serialize_json(doc);
        std::string second = serialize_json(parse_result_json(first));
        REQUIRE(first == second);
        REQUIRE(first.find("\"schema_version\": 1") != std::string::npos);
    }

    SECTION("with robust block") {
        RobustBlock rb;
        rb.weights = {1.0, 0.25, 0.0};
        rb.inlier_indices = {0, 1};
        rb.is_valid = true;
        doc.robust = rb;
        std::string first = serialize_json(doc);
        std::string second = serialize_json(parse_result_json(first));
        REQUIRE(first == second);
    }

    SECTION("round-tripped rotation still satisfies the SO(3) invariants") {
        ResultDocument back = parse_result_json(serialize_json(doc));
        REQUIRE((back.pose.rotation.m.transpose() * back.pose.rotation.m - Mat3::Identity())
                    .norm() < 1e-10);
        REQUIRE((back.pose.rotation.m - doc.pose.rotation.m).norm() == 0.0);
        REQUIRE(back.cost == doc.cost);
        REQUIRE(back.certificate.gap == doc.certificate.gap);
    }
}

TEST_CASE("csv rendering is stable") {
    ResultDocument doc = sample_document();
    std::string a = serialize_csv(doc);
    std::string b = serialize_csv(doc);
    REQUIRE(a == b);
    REQUIRE(a.find("schema_version,") == 0);
    REQUIRE(std::count(a.begin(), a.end(), '\n') == 2);
}

TEST_CASE("benchmark csv schema") {
    std::string header = benchmark_csv_header();
    REQUIRE(header ==
            std::string("seed,n,noise_px,fov_deg,parallax_m,focal_px,outlier_frac,"
                        "rot_err_deg,trans_err_deg,cost,certified,relaxations_tried,"
                        "outer_iters,inner_iters,time_us"));
    std::string ab = benchmark_csv_header(true);
    REQUIRE(ab.find("inner_iters_noprecond") != std::string::npos);

    TrialRecord rec;
    rec.seed = 7;
    rec.n = 100;
    std::string row = benchmark_csv_row(rec);
    REQUIRE(std::count(row.begin(), row.end(), ',') ==
            std::count(header.begin(), header.end(), ','));
    REQUIRE(row.rfind("7,100,", 0) == 0);
}
