#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "muonlab/linalg.hpp"
#include "muonlab/random.hpp"
#include "muonlab/spectra.hpp"

namespace muonlab {

enum class Direction { None, GD, Stiefel };

std::string_view to_string(Direction d);

/// <grad L(W), D> / <D, A D>, the minimizer of L(W - alpha D) over alpha.
/// Throws DegenerateDirection if <D, A D> <= 1e-300.
double exact_step_size(const QuadraticProblem& p, const DenseMatrix& W, const DenseMatrix& D);

/// <grad L(W), D>^2 / (2 <D, A D>) = L(W) - L(W - alpha* D).
double one_step_decrease(const QuadraticProblem& p, const DenseMatrix& W, const DenseMatrix& D);

struct GreedyStep {
    DenseMatrix W;
    Direction chosen = Direction::None;
    double delta_gd = 0.0;
    double delta_stiefel = 0.0;
    double alpha = 0.0;
};

/// Exact line-search steps along D_GD = grad L and D_St = P(grad L); takes the
/// larger decrease, GD on ties.
GreedyStep greedy_step(const QuadraticProblem& p, const DenseMatrix& W);

/// Homogeneous L = 1/2 <W, A W> with A = Q diag(kappa, 1, ..., 1) Q^T, Q Haar.
QuadraticProblem counterexample_instance(std::size_t n, double kappa, RandomStream& stream);

struct LineSearchStep {
    int step = 0;
    double gap = 0.0;
    double grad_norm = 0.0;
    double dist = 0.0;
    /// Direction taken from this iterate; None at the final iterate.
    Direction chosen = Direction::None;
    /// Decreases available from this iterate (greedy policy only).
    double delta_gd = 0.0;
    double delta_stiefel = 0.0;
};

struct LineSearchRun {
    /// "gd_ls" or "greedy".
    std::string policy;
    std::uint64_t seed = 0;
    /// T + 1 entries, iterate 0 included.
    std::vector<LineSearchStep> steps;
};

/// Exact line-search GD and the greedy policy from the same W0 for T steps.
std::pair<LineSearchRun, LineSearchRun> run_linesearch_comparison(const QuadraticProblem& p,
                                                                  const DenseMatrix& W0, int T,
                                                                  std::uint64_t seed = 0);

} // namespace muonlab
