#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "muonlab/errors.hpp"
#include "muonlab/linalg.hpp"
#include "test_util.hpp"

using namespace muonlab;
using testutil::max_abs_diff;
using testutil::orthogonality_error;

TEST_SUITE("linalg") {

TEST_CASE("random stream is deterministic and sub-streams follow the xor rule") {
    RandomStream a(123), b(123);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    CHECK(RandomStream::derive_seed(5, 3) == (5ULL ^ (3ULL * 0x9E3779B97F4A7C15ULL)));
    RandomStream c(9);
    RandomStream sub = c.substream(4);
    RandomStream direct(RandomStream::derive_seed(9, 4));
    CHECK(sub.next_u64() == direct.next_u64());
}

TEST_CASE("uniform draws lie in [0,1) and normals have unit variance") {
    RandomStream s(77);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
    for (int i = 0; i < n; ++i) {
        const double z = s.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.01);
}

TEST_CASE("svd of diagonal inputs") {
    const DenseMatrix m{{3.0, 0.0}, {0.0, 2.0}};
    const SvdResult r = svd(m);
    CHECK(r.singular_values[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.singular_values[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(max_abs_diff(testutil::compose(r.U, r.singular_values, r.V), m) < 1e-14);

    const DenseMatrix neg{{2.0, 0.0}, {0.0, -3.0}};
    const SvdResult rn = svd(neg);
    CHECK(rn.singular_values[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(rn.singular_values[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(max_abs_diff(testutil::compose(rn.U, rn.singular_values, rn.V), neg) < 1e-14);
}

TEST_CASE("svd of a 100x100 gaussian matches eigen's two-sided jacobi") {
    RandomStream s(3);
    const DenseMatrix m = normal_matrix(100, 100, 0.1, s);
    const SvdResult r = svd(m);
    CHECK(frobenius_norm(testutil::compose(r.U, r.singular_values, r.V) - m) <= 1e-8);
    CHECK(orthogonality_error(r.U) <= 1e-10 * 10.0);
    CHECK(orthogonality_error(r.V) <= 1e-10 * 10.0);
    CHECK(std::is_sorted(r.singular_values.rbegin(), r.singular_values.rend()));

    Eigen::JacobiSVD<Eigen::MatrixXd> oracle(testutil::to_eigen(m));
    const Eigen::VectorXd sv = oracle.singularValues();
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(std::abs(r.singular_values[i] - sv(static_cast<Eigen::Index>(i))) <= 1e-12 * sv(0));
    }
}

TEST_CASE("svd round trip on 1000 random shapes up to 100x100") {
    RandomStream s(11);
    double worst = 0.0;
    double worst_orth = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t r = 1 + s.next_u64() % 100;
        const std::size_t c = 1 + s.next_u64() % 100;
        const double scale = std::pow(10.0, 4.0 * s.uniform() - 2.0);
        const DenseMatrix m = normal_matrix(r, c, scale, s);
        const SvdResult d = svd(m);
        REQUIRE(d.singular_values.size() == std::min(r, c));
        const double err = frobenius_norm(testutil::compose(d.U, d.singular_values, d.V) - m);
        worst = std::max(worst, err / std::max(1.0, frobenius_norm(m)));
        const double dim = std::sqrt(static_cast<double>(std::min(r, c)));
        worst_orth = std::max(worst_orth, orthogonality_error(d.U) / dim);
        worst_orth = std::max(worst_orth, orthogonality_error(d.V) / dim);
        REQUIRE(std::is_sorted(d.singular_values.rbegin(), d.singular_values.rend()));
        const MatrixNorms n = matrix_norms(d);
        REQUIRE(n.spectral <= n.frobenius * (1 + 1e-12));
        REQUIRE(n.frobenius <= n.nuclear * (1 + 1e-12));
    }
    CHECK(worst <= 1e-8);
    CHECK(worst_orth <= 1e-10);
}

TEST_CASE("svd rejects non-finite input") {
    DenseMatrix m(2, 2, 1.0);
    m(0, 1) = std::nan("");
    CHECK_THROWS_AS(svd(m), NonFinite);
    m(0, 1) = kInfinity;
    CHECK_THROWS_AS(polar_factor(m), NonFinite);
}

TEST_CASE("polar factor examples") {
    RandomStream s(5);
    const DenseMatrix Q = haar_orthogonal(20, s);
    CHECK(max_abs_diff(polar_factor(Q), Q) < 1e-12);
    CHECK(max_abs_diff(polar_factor(5.0 * Q), Q) < 1e-12);

    const DenseMatrix d{{2.0, 0.0}, {0.0, -3.0}};
    const DenseMatrix expected{{1.0, 0.0}, {0.0, -1.0}};
    CHECK(max_abs_diff(polar_factor(d), expected) < 1e-14);
}

TEST_CASE("polar factor orthogonality and idempotence on full-rank inputs") {
    RandomStream s(6);
    for (int k = 0; k < 20; ++k) {
        const std::size_t n = 2 + s.next_u64() % 60;
        const DenseMatrix m = normal_matrix(n, n, 1.0, s);
        const SvdResult d = svd(m);
        if (d.singular_values.back() < 1e-6 * d.singular_values.front()) {
            continue;
        }
        const DenseMatrix p = polar_factor(m);
        CHECK(orthogonality_error(p) <= 1e-8);
        CHECK(frobenius_norm(polar_factor(p) - p) <= 1e-8);
    }
}

TEST_CASE("rank-deficient polar keeps a partial isometry on the range") {
    // Rank 1: the polar factor on the range is u v^T.
    const DenseMatrix m{{2.0, 0.0}, {0.0, 0.0}};
    const DenseMatrix p = polar_factor(m);
    CHECK(p(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(p(0, 1)) < 1e-14);
    CHECK(std::abs(p(1, 0)) < 1e-14);
    CHECK(std::abs(std::abs(p(1, 1)) - 1.0) < 1e-14);
}

TEST_CASE("newton polar agrees with the svd polar") {
    RandomStream s(8);
    SUBCASE("square, moderately conditioned") {
        for (int k = 0; k < 10; ++k) {
            const DenseMatrix m = normal_matrix(50, 50, 1.0, s);
            CHECK(max_abs_diff(polar_factor_newton(m), polar_factor(m)) < 1e-10);
        }
    }
    SUBCASE("square, kappa 1e4") {
        const DenseMatrix U = haar_orthogonal(40, s);
        const DenseMatrix V = haar_orthogonal(40, s);
        std::vector<double> sv(40);
        for (std::size_t i = 0; i < 40; ++i) {
            sv[i] = std::pow(10.0, -4.0 * static_cast<double>(i) / 39.0);
        }
        const DenseMatrix m = testutil::compose(U, sv, V);
        const DenseMatrix expected = matmul_nt(U, V);
        CHECK(max_abs_diff(polar_factor_newton(m), expected) < 1e-9);
        CHECK(max_abs_diff(polar_factor(m), expected) < 1e-9);
    }
    SUBCASE("tall and wide") {
        const DenseMatrix tall = normal_matrix(30, 12, 1.0, s);
        const DenseMatrix wide = normal_matrix(7, 25, 1.0, s);
        CHECK(max_abs_diff(polar_factor_newton(tall), polar_factor(tall)) < 1e-10);
        CHECK(max_abs_diff(polar_factor_newton(wide), polar_factor(wide)) < 1e-10);
    }
    SUBCASE("singular input falls back") {
        const DenseMatrix m{{1.0, 2.0}, {2.0, 4.0}};
        const DenseMatrix p = polar_factor_newton(m);
        CHECK(p.all_finite());
        CHECK(max_abs_diff(p, polar_factor(m)) < 1e-12);
    }
}

TEST_CASE("haar orthogonal") {
    SUBCASE("n = 1 is a unit scalar") {
        RandomStream s(1);
        const DenseMatrix q = haar_orthogonal(1, s);
        CHECK(std::abs(q(0, 0)) == 1.0);
    }
    SUBCASE("n = 100, seed 7") {
        RandomStream s(7);
        CHECK(orthogonality_error(haar_orthogonal(100, s)) <= 1e-10);
    }
    SUBCASE("deterministic") {
        RandomStream a(42), b(42);
        CHECK(haar_orthogonal(30, a) == haar_orthogonal(30, b));
    }
}

TEST_CASE("matrix norms") {
    const MatrixNorms id = matrix_norms(DenseMatrix::identity(9));
    CHECK(id.frobenius == doctest::Approx(3.0));
    CHECK(id.spectral == doctest::Approx(1.0));
    CHECK(id.nuclear == doctest::Approx(9.0));

    const MatrixNorms d = matrix_norms(DenseMatrix{{3.0, 0.0}, {0.0, 4.0}});
    CHECK(d.frobenius == doctest::Approx(5.0));
    CHECK(d.spectral == doctest::Approx(4.0));
    CHECK(d.nuclear == doctest::Approx(7.0));

    RandomStream s(2);
    const DenseMatrix u = normal_matrix(6, 1, 1.0, s);
    const DenseMatrix v = normal_matrix(4, 1, 1.0, s);
    const DenseMatrix r1 = matmul_nt(u * (1.0 / frobenius_norm(u)), v * (1.0 / frobenius_norm(v)));
    const MatrixNorms n = matrix_norms(r1);
    CHECK(n.frobenius == doctest::Approx(1.0));
    CHECK(n.spectral == doctest::Approx(1.0));
    CHECK(n.nuclear == doctest::Approx(1.0));
}

TEST_CASE("condition number") {
    RandomStream s(4);
    CHECK(condition_number(haar_orthogonal(15, s)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(condition_number(DenseMatrix{{10.0, 0.0}, {0.0, 1e-3}}) == doctest::Approx(1e4).epsilon(1e-12));
    CHECK(condition_number(DenseMatrix{{1.0, 0.0}, {0.0, 0.0}}) == kInfinity);
}

TEST_CASE("normal matrix") {
    RandomStream s(10);
    const DenseMatrix m = normal_matrix(100, 100, 0.1, s);
    double sum = 0.0, sq = 0.0;
    for (double x : m.data()) {
        sum += x;
        sq += x * x;
    }
    const double mean = sum / 1e4;
    const double var = sq / 1e4 - mean * mean;
    CHECK(var >= 0.008);
    CHECK(var <= 0.012);

    RandomStream a(12), b(12);
    CHECK(normal_matrix(5, 7, 1.0, a) == normal_matrix(5, 7, 1.0, b));

    RandomStream c(13), d(13);
    CHECK(normal_matrix(1, 1, 1.0, c)(0, 0) == d.normal());
}

TEST_CASE("shape checks") {
    CHECK_THROWS_AS(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ShapeMismatch);
    CHECK_THROWS_AS(frobenius_inner(DenseMatrix(2, 3), DenseMatrix(3, 2)), ShapeMismatch);
    DenseMatrix y(2, 2);
    CHECK_THROWS_AS(axpy(1.0, DenseMatrix(1, 2), y), ShapeMismatch);
}

TEST_CASE("products agree with eigen") {
    RandomStream s(14);
    const DenseMatrix a = normal_matrix(7, 5, 1.0, s);
    const DenseMatrix b = normal_matrix(5, 9, 1.0, s);
    const DenseMatrix c = normal_matrix(7, 9, 1.0, s);
    CHECK(max_abs_diff(matmul(a, b), testutil::from_eigen(testutil::to_eigen(a) * testutil::to_eigen(b))) <
          1e-13);
    CHECK(max_abs_diff(matmul_tn(a, c),
                       testutil::from_eigen(testutil::to_eigen(a).transpose() * testutil::to_eigen(c))) < 1e-13);
    CHECK(max_abs_diff(matmul_nt(c, b),
                       testutil::from_eigen(testutil::to_eigen(c) * testutil::to_eigen(b).transpose())) < 1e-13);
}

}
