#include "muonlab/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "muonlab/errors.hpp"

namespace muonlab {

namespace {

struct KindName {
    SpectrumKind kind;
    std::string_view name;
};

constexpr std::array<KindName, 7> kKindNames = {{
    {SpectrumKind::MaxSpiked, "max_spiked"},
    {SpectrumKind::MinSpiked, "min_spiked"},
    {SpectrumKind::Uniform, "uniform"},
    {SpectrumKind::Gaussian, "gaussian"},
    {SpectrumKind::LinearDecayToMax, "linear_decay_to_max"},
    {SpectrumKind::UShaped, "u_shaped"},
    {SpectrumKind::GeometricDecayToMax, "geometric_decay_to_max"},
}};

// Joehnk's method in log space: X = U^(1/a), Y = V^(1/b), accept X + Y <= 1.
// For a = 0.2 the powers underflow easily, hence the logs.
double sample_beta(double a, double b, RandomStream& stream) {
    for (;;) {
        const double log_x = std::log(stream.uniform_open()) / a;
        const double log_y = std::log(stream.uniform_open()) / b;
        const double m = std::max(log_x, log_y);
        const double log_sum = m + std::log(std::exp(log_x - m) + std::exp(log_y - m));
        if (log_sum <= 0.0) {
            return std::exp(log_x - log_sum);
        }
    }
}

void validate(const SpectrumSpec& spec) {
    if (spec.n < 2) {
        throw InvalidArgument("spectrum: n must be at least 2");
    }
    if (!(spec.s_min > 0.0) || !(spec.s_min < spec.s_max) || !std::isfinite(spec.s_max)) {
        throw InvalidArgument("spectrum: need 0 < s_min < s_max");
    }
}

DenseMatrix diff_from_optimum(const QuadraticProblem& p, const DenseMatrix& W) {
    if (!W.same_shape(p.W_star)) {
        throw ShapeMismatch("W is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                            ", problem expects " + std::to_string(p.W_star.rows()) + "x" +
                            std::to_string(p.W_star.cols()));
    }
    return W - p.W_star;
}

} // namespace

std::string_view to_string(SpectrumKind kind) {
    for (const auto& entry : kKindNames) {
        if (entry.kind == kind) {
            return entry.name;
        }
    }
    return "unknown";
}

SpectrumKind parse_spectrum_kind(std::string_view name) {
    for (const auto& entry : kKindNames) {
        if (entry.name == name) {
            return entry.kind;
        }
    }
    throw UnknownKind("unknown spectrum kind '" + std::string(name) + "'");
}

std::vector<double> generate_spectrum(const SpectrumSpec& spec, RandomStream& stream) {
    validate(spec);
    const std::size_t n = spec.n;
    const double lo = spec.s_min;
    const double hi = spec.s_max;
    std::vector<double> s(n);
    switch (spec.kind) {
    case SpectrumKind::MaxSpiked:
        std::fill(s.begin(), s.end(), hi);
        break;
    case SpectrumKind::MinSpiked:
        std::fill(s.begin(), s.end(), lo);
        break;
    case SpectrumKind::Uniform:
        for (double& x : s) {
            x = lo + (hi - lo) * stream.uniform();
        }
        break;
    case SpectrumKind::Gaussian: {
        const double k = spec.gaussian_k;
        const double mid = 0.5 * (lo + hi);
        const double sd = (hi - lo) / (2.0 * k);
        for (double& x : s) {
            x = mid + sd * std::clamp(stream.normal(), -k, k);
        }
        break;
    }
    case SpectrumKind::LinearDecayToMax:
        for (double& x : s) {
            x = hi - (hi - lo) * std::sqrt(stream.uniform());
        }
        break;
    case SpectrumKind::GeometricDecayToMax:
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::max(lo, hi * std::pow(spec.geometric_q, static_cast<double>(i)));
        }
        break;
    case SpectrumKind::UShaped:
        for (double& x : s) {
            x = lo + (hi - lo) * sample_beta(spec.beta_alpha, spec.beta_alpha, stream);
        }
        break;
    default:
        throw UnknownKind("unhandled spectrum kind");
    }
    std::sort(s.begin(), s.end(), std::greater<>());
    s.front() = hi;
    s.back() = lo;
    return s;
}

QuadraticProblem build_problem(const SpectrumSpec& spec, RandomStream& stream) {
    std::vector<double> s = generate_spectrum(spec, stream);
    const std::size_t n = spec.n;
    const std::size_t d_out = n;
    const DenseMatrix U = haar_orthogonal(n, stream);
    const DenseMatrix V = haar_orthogonal(n, stream);

    QuadraticProblem p;
    p.W_star = normal_matrix(n, d_out, 1.0 / std::sqrt(static_cast<double>(n)), stream);

    std::vector<double> sigma(n);
    const double scale = static_cast<double>(n * d_out);
    for (std::size_t i = 0; i < n; ++i) {
        sigma[i] = std::sqrt(scale * s[i]);
    }
    // X = U diag(sigma) V^T, so X^T X / (n d_out) = V diag(s) V^T. A is formed
    // from V directly and symmetrized.
    DenseMatrix us = U;
    DenseMatrix vs = V;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            us(i, j) *= sigma[j];
            vs(i, j) *= s[j];
        }
    }
    p.X = matmul_nt(us, V);
    p.A = matmul_nt(vs, V);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (p.A(i, j) + p.A(j, i));
            p.A(i, j) = avg;
            p.A(j, i) = avg;
        }
    }
    p.Y = matmul(p.X, p.W_star);
    p.B = matmul(p.A, p.W_star);
    p.B *= -1.0;
    const double y_norm = frobenius_norm(p.Y);
    p.c = y_norm * y_norm / (2.0 * scale);
    p.eigenvalues = std::move(s);
    return p;
}

QuadraticProblem make_homogeneous_problem(DenseMatrix A, std::vector<double> eigenvalues,
                                          std::size_t d_out) {
    if (A.rows() != A.cols()) {
        throw ShapeMismatch("homogeneous problem: A must be square");
    }
    if (d_out == 0) {
        throw ShapeMismatch("homogeneous problem: d_out must be positive");
    }
    QuadraticProblem p;
    p.W_star = DenseMatrix(A.rows(), d_out);
    p.B = DenseMatrix(A.rows(), d_out);
    p.c = 0.0;
    p.A = std::move(A);
    std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
    p.eigenvalues = std::move(eigenvalues);
    return p;
}

double loss(const QuadraticProblem& p, const DenseMatrix& W) {
    const DenseMatrix d = diff_from_optimum(p, W);
    return 0.5 * frobenius_inner(d, matmul(p.A, d));
}

DenseMatrix gradient(const QuadraticProblem& p, const DenseMatrix& W) {
    return matmul(p.A, diff_from_optimum(p, W));
}

LossAndGradient evaluate(const QuadraticProblem& p, const DenseMatrix& W) {
    const DenseMatrix d = diff_from_optimum(p, W);
    LossAndGradient out;
    out.grad = matmul(p.A, d);
    out.loss = 0.5 * frobenius_inner(d, out.grad);
    return out;
}

double loss_expanded(const QuadraticProblem& p, const DenseMatrix& W) {
    if (!W.same_shape(p.W_star)) {
        throw ShapeMismatch("loss_expanded: shape mismatch");
    }
    return 0.5 * frobenius_inner(W, matmul(p.A, W)) + frobenius_inner(p.B, W) + p.c;
}

double loss_least_squares(const QuadraticProblem& p, const DenseMatrix& W) {
    if (p.X.empty()) {
        throw InvalidArgument("loss_least_squares: problem has no data matrices");
    }
    if (!W.same_shape(p.W_star)) {
        throw ShapeMismatch("loss_least_squares: shape mismatch");
    }
    const double r = frobenius_norm(matmul(p.X, W) - p.Y);
    return r * r / (2.0 * static_cast<double>(p.X.rows() * p.Y.cols()));
}

std::vector<double> gradient_condition_trace(const QuadraticProblem& p,
                                             std::span<const DenseMatrix> iterates) {
    std::vector<double> out;
    out.reserve(iterates.size());
    for (const DenseMatrix& W : iterates) {
        const DenseMatrix g = gradient(p, W);
        if (frobenius_norm(g) == 0.0) {
            out.push_back(kInfinity);
            continue;
        }
        out.push_back(condition_number(g));
    }
    return out;
}

SpectrumSpec ProblemDescriptor::spectrum() const {
    SpectrumSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.s_min = s_min;
    spec.s_max = s_max;
    return spec;
}

QuadraticProblem ProblemDescriptor::build() const {
    RandomStream stream(seed);
    return build_problem(spectrum(), stream);
}

void to_json(nlohmann::json& j, const ProblemDescriptor& d) {
    j = nlohmann::json{{"kind", std::string(to_string(d.kind))},
                       {"n", d.n},
                       {"s_min", d.s_min},
                       {"s_max", d.s_max},
                       {"seed", d.seed}};
}

void from_json(const nlohmann::json& j, ProblemDescriptor& d) {
    d.kind = parse_spectrum_kind(j.at("kind").get<std::string>());
    d.n = j.at("n").get<std::size_t>();
    d.s_min = j.at("s_min").get<double>();
    d.s_max = j.at("s_max").get<double>();
    d.seed = j.at("seed").get<std::uint64_t>();
}

} // namespace muonlab
