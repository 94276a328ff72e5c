#include "muonlab/line_search.hpp"

#include <cmath>

#include "muonlab/errors.hpp"
#include "muonlab/optimizers.hpp"

namespace muonlab {

namespace {

struct RayTerms {
    double slope = 0.0;     // <grad L(W), D>
    double curvature = 0.0; // <D, A D>
};

RayTerms ray_terms(const QuadraticProblem& p, const DenseMatrix& grad, const DenseMatrix& D) {
    if (!D.same_shape(grad)) {
        throw ShapeMismatch("line search: direction shape does not match W");
    }
    RayTerms r;
    r.slope = frobenius_inner(grad, D);
    r.curvature = frobenius_inner(D, matmul(p.A, D));
    if (!(r.curvature > 1e-300)) {
        throw DegenerateDirection("line search: <D, A D> is not positive");
    }
    return r;
}

LineSearchStep observe(const QuadraticProblem& p, const DenseMatrix& W, const LossAndGradient& eval,
                       int step) {
    LineSearchStep s;
    s.step = step;
    s.gap = eval.loss;
    s.grad_norm = frobenius_norm(eval.grad);
    s.dist = frobenius_norm(W - p.W_star);
    return s;
}

} // namespace

std::string_view to_string(Direction d) {
    switch (d) {
    case Direction::GD:
        return "gd";
    case Direction::Stiefel:
        return "stiefel";
    case Direction::None:
        break;
    }
    return "none";
}

double exact_step_size(const QuadraticProblem& p, const DenseMatrix& W, const DenseMatrix& D) {
    const RayTerms r = ray_terms(p, gradient(p, W), D);
    return r.slope / r.curvature;
}

double one_step_decrease(const QuadraticProblem& p, const DenseMatrix& W, const DenseMatrix& D) {
    const RayTerms r = ray_terms(p, gradient(p, W), D);
    return r.slope * r.slope / (2.0 * r.curvature);
}

GreedyStep greedy_step(const QuadraticProblem& p, const DenseMatrix& W) {
    const DenseMatrix grad = gradient(p, W);
    const DenseMatrix stiefel = project(grad, ProjectionMode::ExactPolar);
    const RayTerms gd = ray_terms(p, grad, grad);
    const RayTerms st = ray_terms(p, grad, stiefel);

    GreedyStep out;
    out.delta_gd = gd.slope * gd.slope / (2.0 * gd.curvature);
    out.delta_stiefel = st.slope * st.slope / (2.0 * st.curvature);
    out.W = W;
    if (out.delta_gd >= out.delta_stiefel) {
        out.chosen = Direction::GD;
        out.alpha = gd.slope / gd.curvature;
        axpy(-out.alpha, grad, out.W);
    } else {
        out.chosen = Direction::Stiefel;
        out.alpha = st.slope / st.curvature;
        axpy(-out.alpha, stiefel, out.W);
    }
    return out;
}

QuadraticProblem counterexample_instance(std::size_t n, double kappa, RandomStream& stream) {
    if (n < 2) {
        throw InvalidArgument("counterexample: n must be at least 2");
    }
    if (!(kappa > 1.0)) {
        throw InvalidArgument("counterexample: kappa must exceed 1");
    }
    const DenseMatrix Q = haar_orthogonal(n, stream);
    std::vector<double> s(n, 1.0);
    s.back() = kappa;
    DenseMatrix qs = Q;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            qs(i, j) *= s[j];
        }
    }
    DenseMatrix A = matmul_nt(qs, Q);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (A(i, j) + A(j, i));
            A(i, j) = avg;
            A(j, i) = avg;
        }
    }
    return make_homogeneous_problem(std::move(A), std::move(s), n);
}

std::pair<LineSearchRun, LineSearchRun> run_linesearch_comparison(const QuadraticProblem& p,
                                                                  const DenseMatrix& W0, int T,
                                                                  std::uint64_t seed) {
    if (T < 1) {
        throw InvalidArgument("line search comparison: T must be at least 1");
    }
    LineSearchRun gd{"gd_ls", seed, {}};
    LineSearchRun greedy{"greedy", seed, {}};

    DenseMatrix W = W0;
    for (int t = 0; t <= T; ++t) {
        const LossAndGradient eval = evaluate(p, W);
        LineSearchStep s = observe(p, W, eval, t);
        if (t < T && s.grad_norm > 0.0) {
            const RayTerms r = ray_terms(p, eval.grad, eval.grad);
            s.chosen = Direction::GD;
            s.delta_gd = r.slope * r.slope / (2.0 * r.curvature);
            axpy(-r.slope / r.curvature, eval.grad, W);
        }
        gd.steps.push_back(s);
    }

    W = W0;
    for (int t = 0; t <= T; ++t) {
        const LossAndGradient eval = evaluate(p, W);
        LineSearchStep s = observe(p, W, eval, t);
        if (t < T && s.grad_norm > 0.0) {
            GreedyStep g = greedy_step(p, W);
            s.chosen = g.chosen;
            s.delta_gd = g.delta_gd;
            s.delta_stiefel = g.delta_stiefel;
            W = std::move(g.W);
        }
        greedy.steps.push_back(s);
    }
    return {std::move(gd), std::move(greedy)};
}

} // namespace muonlab
