#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include <anisoglm/cholesky.hpp>
#include <anisoglm/prior_graph.hpp>

#include "support.hpp"

using namespace anisoglm;

namespace {

Eigen::MatrixXd factor_to_dense(const SparseCholesky& chol) {
    const auto& env = chol.factor();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(env.n, env.n);
    for (int i = 0; i < env.n; ++i)
        for (int j = env.first[i]; j <= i; ++j) L(i, j) = env.at(i, j);
    return L;
}

Eigen::MatrixXd permuted_dense(const SparseSymMatrix& Q, const std::vector<int>& perm,
                               double ridge) {
    const Eigen::MatrixXd dense = to_dense(Q) + ridge * Eigen::MatrixXd::Identity(Q.n(), Q.n());
    Eigen::MatrixXd out(Q.n(), Q.n());
    for (int i = 0; i < Q.n(); ++i)
        for (int j = 0; j < Q.n(); ++j) out(i, j) = dense(perm[i], perm[j]);
    return out;
}

} // namespace

TEST_CASE("factorization of simple diagonal matrices") {
    const auto eye = SparseSymMatrix::identity(3);
    SparseCholesky chol(eye);
    REQUIRE(factor_to_dense(chol).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-14));
    REQUIRE(chol.log_det() == Catch::Approx(0.0).margin(1e-14));

    const auto diag = SparseSymMatrix::from_triplets(2, {{0, 0, 4.0}, {1, 1, 9.0}});
    SparseCholesky chol2(diag, {Ordering::natural, 0.0});
    REQUIRE(chol2.factor().at(0, 0) == 2.0);
    REQUIRE(chol2.factor().at(1, 1) == 3.0);
    REQUIRE(chol2.log_det() == Catch::Approx(std::log(36.0)));
}

TEST_CASE("UGL laplacian plus ridge reconstructs within 1e-8") {
    ImageGrid domain(4, 4);
    const auto L = laplacian(build_ugl_adjacency(domain));
    for (auto ordering : {Ordering::natural, Ordering::band}) {
        SparseCholesky chol(L, {ordering, 1e-6});
        const Eigen::MatrixXd G = factor_to_dense(chol);
        const Eigen::MatrixXd target = permuted_dense(L, chol.permutation(), 1e-6);
        const double err = (G * G.transpose() - target).norm() / target.norm();
        REQUIRE(err < 1e-8);
    }
}

TEST_CASE("solve on tiny systems") {
    SparseCholesky eye(SparseSymMatrix::identity(4));
    Eigen::VectorXd b(4);
    b << 1.0, -2.0, 3.5, 0.25;
    REQUIRE((eye.solve(b) - b).norm() == 0.0);

    SparseCholesky half(SparseSymMatrix::from_triplets(1, {{0, 0, 2.0}}));
    Eigen::VectorXd b1(1);
    b1 << 4.0;
    REQUIRE(half.solve(b1)[0] == Catch::Approx(2.0));

    const auto tridiag =
        SparseSymMatrix::from_triplets(2, {{0, 0, 2.0}, {1, 1, 2.0}, {0, 1, -1.0}, {1, 0, -1.0}});
    SparseCholesky chol(tridiag);
    Eigen::VectorXd b2(2);
    b2 << 1.0, 0.0;
    const Eigen::VectorXd x = chol.solve(b2);
    REQUIRE(x[0] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE(x[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("solve recovers random right-hand sides") {
    RngStream rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform() * 36);
        const auto Q = testsupport::random_spd(n, 0.2, rng);
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = rng.normal();
        Eigen::VectorXd b(n);
        Q.multiply(x.data(), b.data());
        SparseCholesky chol(Q, {trial % 2 ? Ordering::band : Ordering::natural, 0.0});
        REQUIRE((chol.solve(b) - x).norm() <= 1e-8 * x.norm());
        REQUIRE_THROWS_AS(chol.solve(Eigen::VectorXd::Zero(n + 1)), Error);
    }
}

TEST_CASE("factorization is bit-for-bit deterministic") {
    RngStream rng(42);
    const auto Q = testsupport::random_spd(30, 0.2, rng);
    SparseCholesky a(Q), b(Q);
    REQUIRE(a.permutation() == b.permutation());
    REQUIRE(a.factor().val == b.factor().val);
}

TEST_CASE("band ordering shrinks the envelope of a shuffled path") {
    // path graph relabeled so natural order has a huge envelope
    const int n = 40;
    std::vector<int> label(n);
    for (int i = 0; i < n; ++i) label[i] = (i * 17) % n;
    std::vector<Triplet> lower;
    for (int i = 0; i < n; ++i) lower.push_back({i, i, 4.0});
    for (int i = 0; i + 1 < n; ++i) {
        const int a = std::max(label[i], label[i + 1]);
        const int b = std::min(label[i], label[i + 1]);
        lower.push_back({a, b, -1.0});
    }
    const auto Q = SparseSymMatrix::from_lower_triplets(n, lower);
    SparseCholesky natural(Q, {Ordering::natural, 0.0});
    SparseCholesky banded(Q, {Ordering::band, 0.0});
    REQUIRE(banded.factor().val.size() < natural.factor().val.size());
    // both solve correctly
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0), b(n);
    Q.multiply(x.data(), b.data());
    REQUIRE((banded.solve(b) - x).norm() < 1e-10 * x.norm());
}

TEST_CASE("indefinite matrices raise a pivot error") {
    const auto Q =
        SparseSymMatrix::from_triplets(2, {{0, 0, 1.0}, {1, 1, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}});
    bool thrown = false;
    try {
        SparseCholesky chol(Q);
    } catch (const NotPositiveDefiniteError& e) {
        thrown = true;
        REQUIRE(e.pivot >= 0);
        REQUIRE(e.pivot < 2);
    }
    REQUIRE(thrown);
    REQUIRE_THROWS_AS(DenseCholesky(to_dense(Q)), NotPositiveDefiniteError);
}

TEST_CASE("log determinant matches a dense eigensolver") {
    RngStream rng(43);
    const auto Q = testsupport::random_spd(5, 0.5, rng);
    SparseCholesky chol(Q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_dense(Q));
    const double expected = es.eigenvalues().array().log().sum();
    REQUIRE(chol.log_det() == Catch::Approx(expected).margin(1e-8));
    DenseCholesky dense(to_dense(Q));
    REQUIRE(dense.log_det() == Catch::Approx(expected).margin(1e-8));
}

TEST_CASE("sparse and dense solves agree") {
    RngStream rng(44);
    const auto Q = testsupport::random_spd(24, 0.25, rng);
    SparseCholesky sparse(Q);
    DenseCholesky dense(to_dense(Q));
    Eigen::VectorXd b(24);
    for (int i = 0; i < 24; ++i) b[i] = rng.normal();
    REQUIRE((sparse.solve(b) - dense.solve(b)).norm() < 1e-10 * b.norm());
}

TEST_CASE("gmrf samples from the identity are standard normal") {
    SparseCholesky chol(SparseSymMatrix::identity(4));
    RngStream rng(45);
    const int draws = 10000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(4), m2 = Eigen::VectorXd::Zero(4);
    for (int d = 0; d < draws; ++d) {
        const Eigen::VectorXd x = chol.sample(Eigen::VectorXd::Zero(4), rng);
        mean += x;
        m2 += x.cwiseProduct(x);
    }
    mean /= draws;
    m2 /= draws;
    for (int i = 0; i < 4; ++i) {
        REQUIRE(std::fabs(mean[i]) < 4.0 / std::sqrt(static_cast<double>(draws)));
        REQUIRE(std::fabs(m2[i] - mean[i] * mean[i] - 1.0) < 0.1);
    }
}

TEST_CASE("gmrf samples honor a diagonal precision") {
    const auto Q = SparseSymMatrix::from_triplets(3, {{0, 0, 4.0}, {1, 1, 4.0}, {2, 2, 4.0}});
    SparseCholesky chol(Q);
    RngStream rng(46);
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(3, 4.0);
    const int draws = 20000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3), m2 = Eigen::VectorXd::Zero(3);
    for (int d = 0; d < draws; ++d) {
        const Eigen::VectorXd x = chol.sample(b, rng);
        mean += x;
        m2 += x.cwiseProduct(x);
    }
    mean /= draws;
    m2 /= draws;
    for (int i = 0; i < 3; ++i) {
        REQUIRE(std::fabs(mean[i] - 1.0) < 4.0 * 0.5 / std::sqrt(static_cast<double>(draws)));
        REQUIRE(std::fabs((m2[i] - mean[i] * mean[i]) - 0.25) < 0.025);
    }
}

TEST_CASE("gmrf sample covariance matches the dense inverse") {
    const auto Q =
        SparseSymMatrix::from_triplets(2, {{0, 0, 2.0}, {1, 1, 2.0}, {0, 1, -1.0}, {1, 0, -1.0}});
    SparseCholesky chol(Q);
    RngStream rng(47);
    Eigen::VectorXd b(2);
    b << 1.0, 0.0;
    const int draws = 50000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(2, 2);
    for (int d = 0; d < draws; ++d) {
        const Eigen::VectorXd x = chol.sample(b, rng);
        mean += x;
        outer += x * x.transpose();
    }
    mean /= draws;
    const Eigen::MatrixXd cov = outer / draws - mean * mean.transpose();
    Eigen::MatrixXd expected(2, 2);
    expected << 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0;
    REQUIRE(std::fabs(mean[0] - 2.0 / 3.0) < 0.02);
    REQUIRE(std::fabs(mean[1] - 1.0 / 3.0) < 0.02);
    REQUIRE((cov - expected).norm() < 0.05 * expected.norm());
}

TEST_CASE("sample covariance is consistent on a random precision") {
    RngStream rng(48);
    const auto Q = testsupport::random_spd(6, 0.5, rng);
    SparseCholesky chol(Q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_dense(Q));
    const Eigen::MatrixXd expected =
        es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
    const int draws = 100000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(6, 6);
    for (int d = 0; d < draws; ++d) {
        const Eigen::VectorXd x = chol.sample(Eigen::VectorXd::Zero(6), rng);
        mean += x;
        outer += x * x.transpose();
    }
    mean /= draws;
    const Eigen::MatrixXd cov = outer / draws - mean * mean.transpose();
    REQUIRE((cov - expected).norm() < 0.05 * expected.norm());
}

TEST_CASE("dense sampler agrees with its own covariance") {
    RngStream rng(49);
    Eigen::MatrixXd Q(2, 2);
    Q << 4.0, 1.0, 1.0, 3.0;
    DenseCholesky chol(Q);
    const Eigen::MatrixXd expected = Q.inverse();
    const int draws = 60000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(2, 2);
    for (int d = 0; d < draws; ++d) {
        const Eigen::VectorXd x = chol.sample(Eigen::VectorXd::Zero(2), rng);
        mean += x;
        outer += x * x.transpose();
    }
    mean /= draws;
    const Eigen::MatrixXd cov = outer / draws - mean * mean.transpose();
    REQUIRE((cov - expected).norm() < 0.05 * expected.norm());
}
