#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "muonlab/errors.hpp"
#include "muonlab/line_search.hpp"
#include "muonlab/optimizers.hpp"
#include "test_util.hpp"

using namespace muonlab;

namespace {

QuadraticProblem identity_problem(std::size_t n) {
    return make_homogeneous_problem(DenseMatrix::identity(n), std::vector<double>(n, 1.0), n);
}

QuadraticProblem random_spd_problem(std::size_t n, RandomStream& s) {
    const DenseMatrix Q = haar_orthogonal(n, s);
    std::vector<double> ev(n);
    for (double& x : ev) {
        x = 0.1 + 5.0 * s.uniform();
    }
    std::sort(ev.rbegin(), ev.rend());
    DenseMatrix A = testutil::compose(Q, ev, Q);
    const DenseMatrix At = A.transpose();
    A = 0.5 * (A + At);
    return make_homogeneous_problem(std::move(A), ev, n);
}

// Loss along W - a D on a uniform grid of a in [lo, hi].
std::pair<double, double> grid_scan(const QuadraticProblem& p, const DenseMatrix& W, const DenseMatrix& D,
                                    double lo, double hi, int points) {
    double best_a = lo, best_l = kInfinity;
    for (int k = 0; k < points; ++k) {
        const double a = lo + (hi - lo) * k / (points - 1);
        const double l = loss(p, W - a * D);
        if (l < best_l) {
            best_l = l;
            best_a = a;
        }
    }
    return {best_a, best_l};
}

} // namespace

TEST_SUITE("line_search") {

TEST_CASE("hand examples on A = I") {
    const QuadraticProblem p = identity_problem(2);
    const DenseMatrix W{{3.0, 0.0}, {0.0, 1.0}};
    CHECK(exact_step_size(p, W, W) == doctest::Approx(1.0));
    const DenseMatrix I = DenseMatrix::identity(2);
    CHECK(exact_step_size(p, W, polar_factor(gradient(p, W))) == doctest::Approx(2.0));
    CHECK(one_step_decrease(p, W, W) == doctest::Approx(5.0));
    CHECK(one_step_decrease(p, W, I) == doctest::Approx(4.0));

    const GreedyStep g = greedy_step(p, W);
    CHECK(g.chosen == Direction::GD);
    CHECK(g.delta_gd == doctest::Approx(5.0));
    CHECK(g.delta_stiefel == doctest::Approx(4.0));
    CHECK(frobenius_norm(g.W) < 1e-14);
}

TEST_CASE("degenerate direction") {
    const QuadraticProblem p = identity_problem(2);
    const DenseMatrix W{{1.0, 0.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(exact_step_size(p, W, DenseMatrix(2, 2)), DegenerateDirection);
    CHECK_THROWS_AS(one_step_decrease(p, W, DenseMatrix(2, 2)), DegenerateDirection);
}

TEST_CASE("exact step matches a 1e5-point grid scan") {
    RandomStream s(40);
    for (int trial = 0; trial < 3; ++trial) {
        const QuadraticProblem p = random_spd_problem(8, s);
        const DenseMatrix W = normal_matrix(8, 8, 1.0, s);
        for (const DenseMatrix& D : {gradient(p, W), polar_factor(gradient(p, W)), normal_matrix(8, 8, 1.0, s)}) {
            const double a = exact_step_size(p, W, D);
            const double la = loss(p, W - a * D);
            const double lo = std::min(0.0, 2.0 * a);
            const double hi = std::max(0.0, 2.0 * a);
            const auto [ga, gl] = grid_scan(p, W, D, lo, hi, 100001);
            CHECK(std::abs(ga - a) <= 2.0 * (hi - lo) / 100000);
            CHECK(la <= gl * (1.0 + 1e-12));
            CHECK(std::abs(gl - la) <= 1e-8 * std::max(std::abs(la), 1e-300));
        }
    }
}

TEST_CASE("decrease identity and line-search optimality") {
    RandomStream s(41);
    for (int trial = 0; trial < 10; ++trial) {
        const QuadraticProblem p = random_spd_problem(10, s);
        const DenseMatrix W = normal_matrix(10, 10, 1.0, s);
        const DenseMatrix D = trial % 2 ? gradient(p, W) : polar_factor(gradient(p, W));
        const double a = exact_step_size(p, W, D);
        const double delta = one_step_decrease(p, W, D);
        const double direct = loss(p, W) - loss(p, W - a * D);
        CHECK(delta >= 0.0);
        CHECK(delta == doctest::Approx(direct).epsilon(1e-9));
        const double h = 1e-4 * std::abs(a);
        CHECK(loss(p, W - (a + h) * D) >= loss(p, W - a * D));
        CHECK(loss(p, W - (a - h) * D) >= loss(p, W - a * D));
    }
}

TEST_CASE("rank-1 gradient: greedy choice matches brute force") {
    RandomStream s(42);
    for (int trial = 0; trial < 5; ++trial) {
        const QuadraticProblem p = random_spd_problem(6, s);
        const DenseMatrix u = normal_matrix(6, 1, 1.0, s);
        const DenseMatrix v = normal_matrix(6, 1, 1.0, s);
        const DenseMatrix G = matmul_nt(u, v);
        // W with grad L(W) = A W = G
        const DenseMatrix W = testutil::from_eigen(testutil::to_eigen(p.A).ldlt().solve(testutil::to_eigen(G)));
        const DenseMatrix grad = gradient(p, W);
        const DenseMatrix st = project(grad, ProjectionMode::ExactPolar);
        const double sigma1 = svd(grad).singular_values[0];
        CHECK(frobenius_inner(grad, st) == doctest::Approx(sigma1).epsilon(1e-10));

        auto brute = [&](const DenseMatrix& D) {
            const double a = exact_step_size(p, W, D);
            const auto [ga, gl] = grid_scan(p, W, D, 0.0, 2.0 * a, 20001);
            return loss(p, W) - gl;
        };
        const double bg = brute(grad);
        const double bs = brute(st);
        const GreedyStep g = greedy_step(p, W);
        CHECK(g.chosen == (bg >= bs ? Direction::GD : Direction::Stiefel));
        // the Stiefel decrease is <grad, D>^2 / (2 <D, A D>) with <grad, D> = sigma_1
        CHECK(g.delta_stiefel == doctest::Approx(sigma1 * sigma1 / (2.0 * frobenius_inner(st, matmul(p.A, st)))));
    }
}

TEST_CASE("greedy choice agrees with brute-force decreases") {
    RandomStream s(43);
    for (int trial = 0; trial < 20; ++trial) {
        const QuadraticProblem p = random_spd_problem(4, s);
        const DenseMatrix W = normal_matrix(4, 4, 1.0, s);
        const DenseMatrix grad = gradient(p, W);
        const DenseMatrix st = polar_factor(grad);
        auto brute = [&](const DenseMatrix& D) {
            const double a = exact_step_size(p, W, D);
            const auto [ga, gl] = grid_scan(p, W, D, a - 1e-3 * std::abs(a), a + 1e-3 * std::abs(a), 2001);
            return loss(p, W) - gl;
        };
        const double bg = brute(grad);
        const double bs = brute(st);
        if (std::abs(bg - bs) < 1e-9 * std::max(bg, bs)) {
            continue;
        }
        const GreedyStep g = greedy_step(p, W);
        CHECK(g.chosen == (bg >= bs ? Direction::GD : Direction::Stiefel));
    }
}

TEST_CASE("counterexample instance") {
    RandomStream s(44);
    const QuadraticProblem p = counterexample_instance(100, 1e3, s);
    CHECK(condition_number(p.A) == doctest::Approx(1e3).epsilon(1e-8));
    CHECK(frobenius_norm(p.W_star) == 0.0);
    CHECK(loss(p, DenseMatrix(100, 100)) == 0.0);
    CHECK(p.eigenvalues.front() == 1e3);
    CHECK(std::all_of(p.eigenvalues.begin() + 1, p.eigenvalues.end(), [](double x) { return x == 1.0; }));
    CHECK_THROWS_AS(counterexample_instance(1, 1e3, s), InvalidArgument);
    CHECK_THROWS_AS(counterexample_instance(10, 1.0, s), InvalidArgument);
}

TEST_CASE("line-search comparison logs monotone gaps and greedy prefers Stiefel") {
    RandomStream s(45);
    const QuadraticProblem p = counterexample_instance(30, 1e3, s);
    const DenseMatrix W0 = normal_matrix(30, 30, 1.0 / std::sqrt(30.0), s);
    const auto [gd, greedy] = run_linesearch_comparison(p, W0, 40, 3);
    CHECK(gd.policy == "gd_ls");
    CHECK(greedy.policy == "greedy");
    REQUIRE(gd.steps.size() == 41);
    REQUIRE(greedy.steps.size() == 41);
    for (std::size_t t = 1; t < 41; ++t) {
        CHECK(gd.steps[t].gap <= gd.steps[t - 1].gap);
        CHECK(greedy.steps[t].gap <= greedy.steps[t - 1].gap);
    }
    for (std::size_t t = 0; t < 40; ++t) {
        CHECK(greedy.steps[t].chosen == Direction::Stiefel);
        CHECK(greedy.steps[t].delta_stiefel > greedy.steps[t].delta_gd);
    }
    CHECK(greedy.steps[40].chosen == Direction::None);
    CHECK(gd.steps[0].dist == doctest::Approx(frobenius_norm(W0)));
    CHECK(gd.steps[0].grad_norm == doctest::Approx(frobenius_norm(gradient(p, W0))));
    CHECK_THROWS_AS(run_linesearch_comparison(p, W0, 0, 0), InvalidArgument);
}

}
