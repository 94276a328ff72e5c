#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "muonlab/errors.hpp"
#include "muonlab/spectra.hpp"
#include "test_util.hpp"

using namespace muonlab;

namespace {

QuadraticProblem identity_problem(std::size_t n) {
    return make_homogeneous_problem(DenseMatrix::identity(n), std::vector<double>(n, 1.0), n);
}

std::vector<double> eigen_eigenvalues_desc(const DenseMatrix& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(testutil::to_eigen(A));
    std::vector<double> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size());
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

} // namespace

TEST_SUITE("spectra") {

TEST_CASE("deterministic spectra") {
    RandomStream s(1);
    SpectrumSpec spec;
    spec.kind = SpectrumKind::MaxSpiked;
    spec.n = 4;
    CHECK(generate_spectrum(spec, s) == std::vector<double>{10.0, 10.0, 10.0, 1e-3});

    spec.kind = SpectrumKind::GeometricDecayToMax;
    spec.n = 3;
    const auto g = generate_spectrum(spec, s);
    CHECK(g[0] == 10.0);
    CHECK(g[1] == doctest::Approx(9.0).epsilon(1e-15));
    // Endpoint enforcement replaces the last entry with s_min.
    CHECK(g[2] == 1e-3);

    spec.n = 10;
    const auto g10 = generate_spectrum(spec, s);
    for (std::size_t i = 1; i + 1 < g10.size(); ++i) {
        CHECK(g10[i] == doctest::Approx(std::max(1e-3, 10.0 * std::pow(0.9, static_cast<double>(i)))));
    }

    spec.kind = SpectrumKind::MinSpiked;
    spec.n = 100;
    const auto m = generate_spectrum(spec, s);
    CHECK(m[0] == 10.0);
    CHECK(std::all_of(m.begin() + 1, m.end(), [](double x) { return x == 1e-3; }));
}

TEST_CASE("every family is sorted, bounded and has exact endpoints") {
    for (SpectrumKind kind : kAllSpectrumKinds) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            RandomStream s(seed);
            SpectrumSpec spec;
            spec.kind = kind;
            const auto ev = generate_spectrum(spec, s);
            REQUIRE(ev.size() == 100);
            CHECK(ev.front() == 10.0);
            CHECK(ev.back() == 1e-3);
            CHECK(std::is_sorted(ev.rbegin(), ev.rend()));
            CHECK(std::all_of(ev.begin(), ev.end(), [](double x) { return x >= 1e-3 && x <= 10.0; }));
        }
    }
}

TEST_CASE("random families have the intended bulk") {
    auto mean_of = [](SpectrumKind kind) {
        double total = 0.0;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            RandomStream s(seed);
            SpectrumSpec spec;
            spec.kind = kind;
            const auto ev = generate_spectrum(spec, s);
            for (std::size_t i = 1; i + 1 < ev.size(); ++i) {
                total += ev[i];
            }
        }
        return total / (50.0 * 98.0);
    };
    const double mid = 0.5 * (10.0 + 1e-3);
    // uniform and symmetric families centre on the midpoint
    CHECK(mean_of(SpectrumKind::Uniform) == doctest::Approx(mid).epsilon(0.03));
    CHECK(mean_of(SpectrumKind::Gaussian) == doctest::Approx(mid).epsilon(0.03));
    CHECK(mean_of(SpectrumKind::UShaped) == doctest::Approx(mid).epsilon(0.05));
    // s_max - (s_max - s_min) sqrt(u) has mean s_max - 2/3 (s_max - s_min)
    CHECK(mean_of(SpectrumKind::LinearDecayToMax) == doctest::Approx(10.0 - 2.0 / 3.0 * (10.0 - 1e-3)).epsilon(0.03));
}

TEST_CASE("spectrum validation") {
    RandomStream s(0);
    SpectrumSpec spec;
    spec.n = 1;
    CHECK_THROWS_AS(generate_spectrum(spec, s), InvalidArgument);
    spec.n = 10;
    spec.s_min = 5.0;
    spec.s_max = 1.0;
    CHECK_THROWS_AS(generate_spectrum(spec, s), InvalidArgument);
    CHECK_THROWS_AS(parse_spectrum_kind("lognormal"), UnknownKind);
    for (SpectrumKind k : kAllSpectrumKinds) {
        CHECK(parse_spectrum_kind(to_string(k)) == k);
    }
}

TEST_CASE("built problem: spectrum fidelity, optimum, hessian condition") {
    for (SpectrumKind kind : kAllSpectrumKinds) {
        ProblemDescriptor d;
        d.kind = kind;
        d.seed = 100 + static_cast<std::uint64_t>(kind);
        const QuadraticProblem p = d.build();
        const auto ev = eigen_eigenvalues_desc(p.A);
        REQUIRE(ev.size() == p.eigenvalues.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < ev.size(); ++i) {
            worst = std::max(worst, std::abs(ev[i] - p.eigenvalues[i]) / p.eigenvalues[i]);
        }
        CHECK(worst <= 1e-8);
        CHECK(loss(p, p.W_star) <= 1e-18);
        CHECK(loss_least_squares(p, p.W_star) <= 1e-18);
        CHECK(frobenius_norm(gradient(p, p.W_star)) <= 1e-9);
        CHECK(condition_number(p.A) == doctest::Approx(1e4).epsilon(1e-6));
    }
}

TEST_CASE("design matrix singular values are sqrt(n d_out s)") {
    ProblemDescriptor d;
    d.kind = SpectrumKind::MaxSpiked;
    d.seed = 3;
    const QuadraticProblem p = d.build();
    const SvdResult r = svd(p.X);
    // 99 of the 100 prescribed eigenvalues equal 10
    CHECK(r.singular_values[0] == doctest::Approx(316.2278).epsilon(1e-6));
    CHECK(r.singular_values[98] == doctest::Approx(std::sqrt(100.0 * 100.0 * 10.0)).epsilon(1e-10));
    CHECK(r.singular_values[99] == doctest::Approx(std::sqrt(100.0 * 100.0 * 1e-3)).epsilon(1e-8));
}

TEST_CASE("loss forms agree") {
    ProblemDescriptor d;
    d.kind = SpectrumKind::Uniform;
    d.seed = 9;
    const QuadraticProblem p = d.build();
    RandomStream s(99);
    for (int k = 0; k < 5; ++k) {
        const DenseMatrix W = normal_matrix(100, 100, 0.1, s);
        const double centered = loss(p, W);
        CHECK(loss_expanded(p, W) == doctest::Approx(centered).epsilon(1e-9));
        CHECK(loss_least_squares(p, W) == doctest::Approx(centered).epsilon(1e-9));
        const LossAndGradient e = evaluate(p, W);
        CHECK(e.loss == centered);
        // gradient identity A(W - W*) = A W + B
        const DenseMatrix via_b = matmul(p.A, W) + p.B;
        CHECK(testutil::max_abs_diff(e.grad, via_b) <= 1e-9 * std::max(1.0, frobenius_norm(via_b)));
    }
}

TEST_CASE("isotropic hand example") {
    const QuadraticProblem p = identity_problem(2);
    const DenseMatrix W{{3.0, 0.0}, {0.0, 1.0}};
    CHECK(loss(p, W) == 5.0);
    CHECK(gradient(p, W) == W);
    CHECK_THROWS_AS(loss_least_squares(p, W), InvalidArgument);
    CHECK_THROWS_AS(loss(p, DenseMatrix(3, 2)), ShapeMismatch);
}

TEST_CASE("gradient matches central finite differences") {
    ProblemDescriptor d;
    d.kind = SpectrumKind::Gaussian;
    d.n = 30;
    d.seed = 17;
    const QuadraticProblem p = d.build();
    RandomStream s(18);
    const DenseMatrix W = normal_matrix(30, 30, 0.2, s);
    const DenseMatrix g = gradient(p, W);
    const double h = 1e-6;
    for (int k = 0; k < 10; ++k) {
        DenseMatrix D = normal_matrix(30, 30, 1.0, s);
        D *= 1.0 / frobenius_norm(D);
        const double fd = (loss_expanded(p, W + h * D) - loss_expanded(p, W - h * D)) / (2.0 * h);
        const double exact = frobenius_inner(g, D);
        CHECK(std::abs(fd - exact) <= 1e-5 * std::max(1.0, std::abs(exact)));
    }
}

TEST_CASE("gradient condition trace") {
    ProblemDescriptor d;
    d.kind = SpectrumKind::Uniform;
    d.n = 20;
    d.seed = 1;
    const QuadraticProblem p = d.build();
    const std::vector<DenseMatrix> at_opt{p.W_star};
    CHECK(gradient_condition_trace(p, at_opt)[0] == kInfinity);

    const QuadraticProblem iso = identity_problem(6);
    RandomStream s(2);
    const std::vector<DenseMatrix> ws{normal_matrix(6, 6, 1.0, s), normal_matrix(6, 6, 1.0, s)};
    const auto trace = gradient_condition_trace(iso, ws);
    CHECK(trace[0] == doctest::Approx(condition_number(ws[0])));
    CHECK(trace[1] == doctest::Approx(condition_number(ws[1])));
}

TEST_CASE("descriptor round-trips through json and regenerates the same problem") {
    ProblemDescriptor d;
    d.kind = SpectrumKind::UShaped;
    d.n = 12;
    d.seed = 0xDEADBEEFULL;
    const nlohmann::json j = d;
    const ProblemDescriptor back = j.get<ProblemDescriptor>();
    CHECK(back.kind == d.kind);
    CHECK(back.seed == d.seed);
    CHECK(back.n == d.n);
    const QuadraticProblem a = d.build();
    const QuadraticProblem b = back.build();
    CHECK(a.A == b.A);
    CHECK(a.W_star == b.W_star);
    CHECK(a.eigenvalues == b.eigenvalues);
}

}
