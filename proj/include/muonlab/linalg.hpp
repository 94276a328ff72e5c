#pragma once

#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "muonlab/random.hpp"

namespace muonlab {

/// Row-major dense matrix of doubles. Carrier for weights, gradients and
/// factors throughout the library.
class DenseMatrix {
public:
    DenseMatrix() = default;
    /// rows x cols filled with `fill`; both dimensions must be positive.
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Takes ownership of row-major `data`; length must equal rows * cols.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    /// Nested row list, e.g. {{1, 2}, {3, 4}}.
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix diagonal(std::span<const double> diag);
    static DenseMatrix zeros_like(const DenseMatrix& other) {
        return DenseMatrix(other.rows(), other.cols());
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    DenseMatrix transpose() const;
    bool all_finite() const;
    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    DenseMatrix& operator+=(const DenseMatrix& other);
    DenseMatrix& operator-=(const DenseMatrix& other);
    DenseMatrix& operator*=(double scale);

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator*(DenseMatrix lhs, double scale);
DenseMatrix operator*(double scale, DenseMatrix rhs);

/// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

/// y += alpha * x
void axpy(double alpha, const DenseMatrix& x, DenseMatrix& y);
/// Frobenius inner product <a, b> = trace(a^T b).
double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm(const DenseMatrix& m);

/// Thin SVD M = U diag(sigma) V^T with d = min(rows, cols) columns.
struct SvdResult {
    DenseMatrix U;
    std::vector<double> singular_values;
    DenseMatrix V;
    /// Jacobi sweeps used.
    int sweeps = 0;
};

/// Tuning knobs for the one-sided Jacobi SVD.
struct SvdOptions {
    double tolerance = 1e-12;
    int max_sweeps = 64;
};

/// One-sided (Hestenes) Jacobi SVD.
///
/// Throws NonFinite for NaN/Inf input and NonConvergence if the sweep limit is
/// exceeded. Singular values come back sorted non-increasing. Columns of U
/// belonging to exactly zero singular values are an orthonormal completion.
SvdResult svd(const DenseMatrix& m, const SvdOptions& options = {});

/// Polar factor U V^T. Directions with (near-)zero singular values are kept,
/// so the factor is orthogonal-like even for rank-deficient input, but not
/// unique there.
DenseMatrix polar_factor(const DenseMatrix& m);

/// Same polar factor computed by the scaled Newton iteration
/// X <- (z X + X^{-T} / z) / 2, run to full precision. About twice as fast as
/// the SVD route for square gradients; falls back to `polar_factor` when the
/// input is numerically singular or the iteration stalls.
DenseMatrix polar_factor_newton(const DenseMatrix& m);

struct MatrixNorms {
    double frobenius = 0.0;
    double spectral = 0.0;
    double nuclear = 0.0;
};

MatrixNorms matrix_norms(const DenseMatrix& m);
MatrixNorms matrix_norms(const SvdResult& decomposition);

/// sigma_max / sigma_min, or +infinity when sigma_min < 1e-300.
double condition_number(const DenseMatrix& m);
double condition_number(std::span<const double> singular_values);

/// Haar-distributed orthogonal n x n matrix: Q factor of a Householder QR of
/// an i.i.d. N(0,1) matrix, with diag(R) forced positive.
DenseMatrix haar_orthogonal(std::size_t n, RandomStream& stream);

/// Entries i.i.d. N(0, scale^2), drawn in row-major order.
DenseMatrix normal_matrix(std::size_t rows, std::size_t cols, double scale, RandomStream& stream);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

} // namespace muonlab
