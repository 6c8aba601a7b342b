#include "test_support.hpp"

#include <catch_amalgamated.hpp>

using namespace certpose;
using test_support::random_pose;

namespace {

// Reference 12x7 constraint Jacobian built symbolically from the stacked
// vector: rows in vec(E) (column-major) order, symbols e1..e9 enumerating E
// row by row, entries equal to A_k x. Columns ordered (h1 h2 h5 h3 h6 h4 h7).
Eigen::Matrix<double, 12, 7> reference_full_jacobian(const RelativePose& pose) {
    const Mat3& em = essential_from_pose(pose).m;
    const Vec3& t = pose.translation.v;
    double e1 = em(0, 0), e2 = em(0, 1), e3 = em(0, 2);
    double e4 = em(1, 0), e5 = em(1, 1), e6 = em(1, 2);
    double e7 = em(2, 0), e8 = em(2, 1), e9 = em(2, 2);
    double t1 = t(0), t2 = t(1), t3 = t(2);
    Eigen::Matrix<double, 12, 7> j;
    j << 0, e1, e7 / 2, 0, 0, 0, e4 / 2,
        0, 0, 0, e4, e7 / 2, 0, e1 / 2,
        0, 0, e1 / 2, 0, e4 / 2, e7, 0,
        0, e2, e8 / 2, 0, 0, 0, e5 / 2,
        0, 0, 0, e5, e8 / 2, 0, e2 / 2,
        0, 0, e2 / 2, 0, e5 / 2, e8, 0,
        0, e3, e9 / 2, 0, 0, 0, e6 / 2,
        0, 0, 0, e6, e9 / 2, 0, e3 / 2,
        0, 0, e3 / 2, 0, e6 / 2, e9, 0,
        t1, 0, t3 / 2, -t1, 0, -t1, t2 / 2,
        t2, -t2, 0, 0, t3 / 2, -t2, t1 / 2,
        t3, -t3, t1 / 2, -t3, t2 / 2, 0, 0;
    return j;
}

// column of the reference table holding constraint h_k
constexpr int kTableColumn[8] = {-1, 0, 1, 3, 5, 2, 4, 6};

}  // namespace

TEST_CASE("constraint matrices encode the quadratic feasibility conditions") {
    const auto& cm = constraint_matrices();
    for (const auto& a : cm.a) REQUIRE((a - a.transpose()).norm() == 0.0);

    // h1 on a unit translation
    RelativePose id(RotationMatrix(), TranslationDirection(Vec3::UnitZ()));
    Vec12 x0 = id.stacked();
    REQUIRE(x0.dot(cm.a[0] * x0) == Catch::Approx(1.0));

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        Vec12 x = random_pose(rng).stacked();
        for (int k = 0; k < 7; ++k)
            REQUIRE(x.dot(cm.a[k] * x) - cm.c[k] == Catch::Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("constraint jacobian matches the symbolic reference table") {
    const auto& cm = constraint_matrices();
    std::mt19937_64 rng(2);

    SECTION("A_k x reproduces every reference column, including (I, e3)") {
        std::vector<RelativePose> poses = {
            RelativePose(RotationMatrix(), TranslationDirection(Vec3::UnitZ()))};
        for (int k = 0; k < 20; ++k) poses.push_back(random_pose(rng));
        for (const auto& pose : poses) {
            Vec12 x = pose.stacked();
            auto ref = reference_full_jacobian(pose);
            for (int k = 1; k <= 7; ++k)
                REQUIRE((Vec12(cm.a[k - 1] * x) - ref.col(kTableColumn[k])).norm() < 1e-12);
        }
    }

    SECTION("build_jacobian columns are the retained A_k x in order") {
        for (int dropped = 2; dropped <= 7; ++dropped) {
            Vec12 x = random_pose(rng).stacked();
            auto j = build_jacobian(x, dropped);
            auto kept = retained_constraints(dropped);
            for (int k = 0; k < 6; ++k)
                REQUIRE((j.col(k) - cm.a[kept[k] - 1] * x).norm() == 0.0);
        }
        REQUIRE_THROWS_AS(retained_constraints(1), std::invalid_argument);
        REQUIRE_THROWS_AS(retained_constraints(8), std::invalid_argument);
    }

    SECTION("full column rank at valid poses") {
        for (int trial = 0; trial < 100; ++trial) {
            Vec12 x = random_pose(rng).stacked();
            auto j = build_jacobian(x, 7);
            Eigen::JacobiSVD<Eigen::Matrix<double, 12, 6>> svd(j);
            REQUIRE(svd.singularValues()(5) > 1e-8 * svd.singularValues()(0));
        }
    }

    SECTION("columns match finite differences of the constraint values") {
        Vec12 x = random_pose(rng).stacked();
        const double h = 1e-6;
        for (int k = 1; k <= 7; ++k) {
            Vec12 ax = cm.a[k - 1] * x;
            for (int idx = 0; idx < 12; ++idx) {
                Vec12 xp = x, xm = x;
                xp(idx) += h;
                xm(idx) -= h;
                double fd = (xp.dot(cm.a[k - 1] * xp) - xm.dot(cm.a[k - 1] * xm)) / (2 * h);
                // gradient of x^T A x is 2 A x; the jacobian stores A x
                REQUIRE(2.0 * ax(idx) == Catch::Approx(fd).margin(1e-6));
            }
        }
    }
}

TEST_CASE("dual candidates solve the least-squares multiplier system") {
    std::mt19937_64 rng(3);

    SECTION("zero data matrix gives zero multipliers") {
        Vec12 x = random_pose(rng).stacked();
        DualCandidate cand = solve_dual_candidate(Mat12::Zero(), x, 7);
        REQUIRE(cand.lambda.norm() < 1e-14);
        REQUIRE(cand.residual < 1e-14);
    }

    SECTION("noiseless ground truth yields zero dual value") {
        ProblemInstance inst = generate_scene(test_support::scene_params(5, 30, 0.0));
        Mat12 q = build_data_matrix(inst.corr).padded();
        DualCandidate cand = solve_dual_candidate(q, inst.gt_pose.stacked(), 7);
        REQUIRE(std::abs(cand.lambda(0)) <= 1e-12 * (1.0 + q.trace()));
    }

    SECTION("residual is orthogonal to the jacobian range") {
        for (int trial = 0; trial < 20; ++trial) {
            Mat12 q = test_support::random_data_matrix(rng).padded();
            RelativePose pose = random_pose(rng);
            Vec12 x = pose.stacked();
            DualCandidate cand = solve_dual_candidate(q, x, 7);
            auto j = build_jacobian(x, 7);
            Vec12 resid = j * cand.lambda - q * x;
            REQUIRE((j.transpose() * resid).norm() <= 1e-10 * (1.0 + (q * x).norm()));
        }
    }
}

TEST_CASE("lagrangian hessian splits into block spectra") {
    std::mt19937_64 rng(4);
    Mat12 q = test_support::random_data_matrix(rng).padded();
    RelativePose pose = random_pose(rng);
    DualCandidate cand = solve_dual_candidate(q, pose.stacked(), 7);

    auto [be, bt] = hessian_of_lagrangian(q, cand);
    REQUIRE((be - be.transpose()).norm() == 0.0);
    REQUIRE((bt - bt.transpose()).norm() == 0.0);

    SECTION("zero multipliers return the data block and a zero block") {
        DualCandidate zero;
        zero.lambda.setZero();
        zero.dropped_constraint = 7;
        auto [ze, zt] = hessian_of_lagrangian(q, zero);
        REQUIRE((ze - q.topLeftCorner<9, 9>()).norm() == 0.0);
        REQUIRE(zt.norm() == 0.0);
    }

    SECTION("union of block spectra equals the assembled 12x12 spectrum") {
        const auto& cm = constraint_matrices();
        auto kept = retained_constraints(7);
        Mat12 m = q;
        for (int k = 0; k < 6; ++k) m -= cand.lambda(k) * cm.a[kept[k] - 1];
        Eigen::SelfAdjointEigenSolver<Mat12> full(m);
        Eigen::SelfAdjointEigenSolver<Mat9> ee(be);
        Eigen::SelfAdjointEigenSolver<Mat3> et(bt);
        std::vector<double> merged;
        for (int i = 0; i < 9; ++i) merged.push_back(ee.eigenvalues()(i));
        for (int i = 0; i < 3; ++i) merged.push_back(et.eigenvalues()(i));
        std::sort(merged.begin(), merged.end());
        for (int i = 0; i < 12; ++i)
            REQUIRE(full.eigenvalues()(i) ==
                    Catch::Approx(merged[i]).margin(1e-10 * (1 + m.norm())));
    }
}

TEST_CASE("closed-form 3x3 minimum eigenvalue") {
    REQUIRE(min_eigenvalue_sym3(Mat3::Identity()) == Catch::Approx(1.0));
    REQUIRE(min_eigenvalue_sym3(Vec3(1, 2, 3).asDiagonal()) == Catch::Approx(1.0));
    Mat3 m;
    m << 2, 1, 0, 1, 2, 0, 0, 0, 5;
    REQUIRE(min_eigenvalue_sym3(m) == Catch::Approx(1.0).margin(1e-12));

    Mat3 asym;
    asym << 1, 2, 3, 0, 1, 2, 0, 0, 1;
    REQUIRE_THROWS_AS(min_eigenvalue_sym3(asym), std::invalid_argument);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 200; ++trial) {
        Mat3 a;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = gauss(rng);
        Mat3 s = a + a.transpose();
        Eigen::SelfAdjointEigenSolver<Mat3> eig(s, Eigen::EigenvaluesOnly);
        REQUIRE(min_eigenvalue_sym3(s) ==
                Catch::Approx(eig.eigenvalues()(0)).margin(1e-10 * (1 + s.norm())));
    }
}

TEST_CASE("9x9 minimum eigenvalue matches a characteristic-polynomial oracle") {
    REQUIRE(min_eigenvalue_sym9(Mat9::Identity()) == Catch::Approx(1.0));
    Vec9 d = Vec9::Ones();
    d(0) = -2;
    REQUIRE(min_eigenvalue_sym9(d.asDiagonal()) == Catch::Approx(-2.0));

    std::mt19937_64 rng(6);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 10; ++trial) {
        Mat9 a;
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j) a(i, j) = gauss(rng);
        Mat9 s = 0.5 * (a + a.transpose());
        double mu = min_eigenvalue_sym9(s);
        // char-poly check: det(s - mu I) ~ 0 and s - (mu - delta) I is PD
        REQUIRE(std::abs(Mat9(s - mu * Mat9::Identity()).determinant()) <=
                1e-8 * std::pow(s.norm() + 1, 9));
        Eigen::LLT<Mat9> llt(Mat9(s - (mu - 1e-6 * (1 + s.norm())) * Mat9::Identity()));
        REQUIRE(llt.info() == Eigen::Success);
    }
}

TEST_CASE("certify accepts refined optima and rejects random poses") {
    SECTION("noiseless refined solution certifies at the first relaxation") {
        ProblemInstance inst = generate_scene(test_support::scene_params(7, 50, 0.0));
        DataMatrix c = build_data_matrix(inst.corr);
        SolveReport report = refine_on_manifold(c, inst.gt_pose);
        Certificate cert = certify(c, report.pose);
        REQUIRE(cert.status == CertificateStatus::Optimal);
        REQUIRE(cert.relaxations_tried == 1);
        REQUIRE(std::abs(cert.gap) <= 1e-14 * (1.0 + c.trace()));
    }

    SECTION("a random pose on noisy data stays Unknown") {
        std::mt19937_64 rng(8);
        ProblemInstance inst = generate_scene(test_support::scene_params(8, 50, 0.5));
        DataMatrix c = build_data_matrix(inst.corr);
        Certificate cert = certify(c, random_pose(rng));
        REQUIRE(cert.status == CertificateStatus::Unknown);
    }

    SECTION("weak duality holds for every certified result") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            ProblemInstance inst =
                generate_scene(test_support::scene_params(300 + seed, 60, 0.5));
            DataMatrix c = build_data_matrix(inst.corr);
            EightPointResult init = initialize_eight_point(inst.corr);
            SolveReport report =
                refine_on_manifold(c, pose_from_essential(init.essential, inst.corr).pose);
            Certificate cert = certify(c, report.pose);
            if (cert.status == CertificateStatus::Optimal)
                REQUIRE(cert.dual_value <=
                        cert.primal_value + 1e-14 * (1.0 + cert.primal_value));
        }
    }

    SECTION("max_relaxations is validated") {
        ProblemInstance inst = generate_scene(test_support::scene_params(9, 20, 0.0));
        DataMatrix c = build_data_matrix(inst.corr);
        CertifierOptions opts;
        opts.max_relaxations = 0;
        REQUIRE_THROWS_AS(certify(c, inst.gt_pose, opts), std::invalid_argument);
    }
}
