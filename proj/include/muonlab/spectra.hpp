#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "muonlab/linalg.hpp"
#include "muonlab/random.hpp"

namespace muonlab {

enum class SpectrumKind {
    MaxSpiked,
    MinSpiked,
    Uniform,
    Gaussian,
    LinearDecayToMax,
    UShaped,
    GeometricDecayToMax,
};

/// All seven families, in the row order used by the result tables.
inline constexpr std::array<SpectrumKind, 7> kAllSpectrumKinds = {
    SpectrumKind::MaxSpiked,        SpectrumKind::MinSpiked, SpectrumKind::Uniform,
    SpectrumKind::Gaussian,         SpectrumKind::LinearDecayToMax,
    SpectrumKind::UShaped,          SpectrumKind::GeometricDecayToMax,
};

std::string_view to_string(SpectrumKind kind);
/// Accepts the snake_case names (max_spiked, ..., u_shaped). Throws UnknownKind.
SpectrumKind parse_spectrum_kind(std::string_view name);

struct SpectrumSpec {
    SpectrumKind kind = SpectrumKind::Uniform;
    std::size_t n = 100;
    double s_min = 1e-3;
    double s_max = 10.0;
    /// gaussian: clip |z| <= k, standard deviation (s_max - s_min) / (2k).
    double gaussian_k = 3.0;
    /// geometric_decay_to_max ratio.
    double geometric_q = 0.9;
    /// u_shaped: Beta(alpha, alpha).
    double beta_alpha = 0.2;
};

/// Eigenvalues sorted non-increasing with s_1 = s_max and s_n = s_min exactly.
/// Deterministic kinds consume nothing from `stream`.
std::vector<double> generate_spectrum(const SpectrumSpec& spec, RandomStream& stream);

/// Quadratic L(W) = 1/2 <W, A W> + <B, W> + c with planted minimizer W_star.
///
/// For least-squares instances X, Y hold the data and A = X^T X / (n d_out).
/// Homogeneous instances (B = 0, c = 0, W_star = 0) leave X and Y empty.
struct QuadraticProblem {
    DenseMatrix X;
    DenseMatrix Y;
    DenseMatrix W_star;
    DenseMatrix A;
    DenseMatrix B;
    double c = 0.0;
    /// Prescribed eigenvalues of A, non-increasing.
    std::vector<double> eigenvalues;

    std::size_t d_in() const { return A.rows(); }
    std::size_t d_out() const { return W_star.cols(); }
    double s_max() const { return eigenvalues.front(); }
    double s_min() const { return eigenvalues.back(); }
};

/// Draw order from `stream`: spectrum, U, V (Haar), W_star (N(0, 1/n)).
QuadraticProblem build_problem(const SpectrumSpec& spec, RandomStream& stream);

/// L(W) = 1/2 <W, A W>, W_star = 0, with W of shape A.rows() x d_out.
/// `eigenvalues` are recorded as given (sorted non-increasing on entry).
QuadraticProblem make_homogeneous_problem(DenseMatrix A, std::vector<double> eigenvalues,
                                          std::size_t d_out);

/// Evaluated in centered form 1/2 <W - W*, A (W - W*)>, which is exact at the
/// optimum and free of the cancellation the expanded form suffers near it.
double loss(const QuadraticProblem& p, const DenseMatrix& W);
/// A (W - W*).
DenseMatrix gradient(const QuadraticProblem& p, const DenseMatrix& W);

struct LossAndGradient {
    double loss = 0.0;
    DenseMatrix grad;
};
/// Loss and gradient sharing a single product.
LossAndGradient evaluate(const QuadraticProblem& p, const DenseMatrix& W);

/// 1/2 <W, A W> + <B, W> + c, term by term.
double loss_expanded(const QuadraticProblem& p, const DenseMatrix& W);
/// ||X W - Y||_F^2 / (2 n d_out). Throws InvalidArgument for homogeneous problems.
double loss_least_squares(const QuadraticProblem& p, const DenseMatrix& W);

/// kappa(grad L(W_t)) for each iterate; +inf where the gradient is singular.
std::vector<double> gradient_condition_trace(const QuadraticProblem& p,
                                             std::span<const DenseMatrix> iterates);

/// Problems are stored as descriptors and regenerated on demand.
struct ProblemDescriptor {
    SpectrumKind kind = SpectrumKind::Uniform;
    std::size_t n = 100;
    double s_min = 1e-3;
    double s_max = 10.0;
    std::uint64_t seed = 0;

    SpectrumSpec spectrum() const;
    QuadraticProblem build() const;
};

void to_json(nlohmann::json& j, const ProblemDescriptor& d);
void from_json(const nlohmann::json& j, ProblemDescriptor& d);

} // namespace muonlab
