#include "muonlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "muonlab/errors.hpp"

namespace muonlab {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const DenseMatrix& m) {
    return ConstMap(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                    static_cast<Eigen::Index>(m.cols()));
}

MutMap view(DenseMatrix& m) {
    return MutMap(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

std::string shape_str(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
    }
}

} // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw ShapeMismatch("DenseMatrix dimensions must be positive");
    }
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) {
        throw ShapeMismatch("DenseMatrix dimensions must be positive");
    }
    if (data_.size() != rows * cols) {
        throw ShapeMismatch("DenseMatrix data length " + std::to_string(data_.size()) +
                            " != " + std::to_string(rows) + "*" + std::to_string(cols));
    }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    if (rows_ == 0 || cols_ == 0) {
        throw ShapeMismatch("DenseMatrix dimensions must be positive");
    }
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ShapeMismatch("ragged initializer list");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, i) = 1.0;
    }
    return out;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
    DenseMatrix out(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
        out(i, i) = diag[i];
    }
    return out;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            out(j, i) = (*this)(i, j);
        }
    }
    return out;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) {
        data_[k] += other.data_[k];
    }
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) {
        data_[k] -= other.data_[k];
    }
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double scale) {
    for (double& x : data_) {
        x *= scale;
    }
    return *this;
}

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs += rhs; }
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs -= rhs; }
DenseMatrix operator*(DenseMatrix lhs, double scale) { return lhs *= scale; }
DenseMatrix operator*(double scale, DenseMatrix rhs) { return rhs *= scale; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeMismatch("matmul: " + shape_str(a) + " * " + shape_str(b));
    }
    DenseMatrix out(a.rows(), b.cols());
    view(out).noalias() = view(a) * view(b);
    return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeMismatch("matmul_tn: " + shape_str(a) + "^T * " + shape_str(b));
    }
    DenseMatrix out(a.cols(), b.cols());
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeMismatch("matmul_nt: " + shape_str(a) + " * " + shape_str(b) + "^T");
    }
    DenseMatrix out(a.rows(), b.rows());
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

void axpy(double alpha, const DenseMatrix& x, DenseMatrix& y) {
    require_same_shape(x, y, "axpy");
    auto xs = x.data();
    auto ys = y.data();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        ys[k] += alpha * xs[k];
    }
}

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "frobenius_inner");
    auto as = a.data();
    auto bs = b.data();
    double acc = 0.0;
    for (std::size_t k = 0; k < as.size(); ++k) {
        acc += as[k] * bs[k];
    }
    return acc;
}

double frobenius_norm(const DenseMatrix& m) {
    // Scaled accumulation so tiny and huge entries neither underflow nor overflow.
    double scale = 0.0;
    for (double x : m.data()) {
        scale = std::max(scale, std::abs(x));
    }
    if (scale == 0.0 || !std::isfinite(scale)) {
        return scale;
    }
    double acc = 0.0;
    for (double x : m.data()) {
        const double y = x / scale;
        acc += y * y;
    }
    return scale * std::sqrt(acc);
}

MatrixNorms matrix_norms(const SvdResult& decomposition) {
    MatrixNorms out;
    double sq = 0.0;
    for (double s : decomposition.singular_values) {
        out.nuclear += s;
        sq += s * s;
    }
    out.spectral = decomposition.singular_values.empty() ? 0.0 : decomposition.singular_values.front();
    out.frobenius = std::sqrt(sq);
    return out;
}

MatrixNorms matrix_norms(const DenseMatrix& m) {
    MatrixNorms out = matrix_norms(svd(m));
    // Direct entrywise value is more accurate than the singular-value sum.
    out.frobenius = frobenius_norm(m);
    return out;
}

double condition_number(std::span<const double> singular_values) {
    if (singular_values.empty()) {
        return kInfinity;
    }
    const auto [lo, hi] = std::minmax_element(singular_values.begin(), singular_values.end());
    if (*lo < 1e-300) {
        return kInfinity;
    }
    return *hi / *lo;
}

double condition_number(const DenseMatrix& m) {
    return condition_number(svd(m).singular_values);
}

DenseMatrix normal_matrix(std::size_t rows, std::size_t cols, double scale, RandomStream& stream) {
    if (!(scale > 0.0)) {
        throw InvalidArgument("normal_matrix: scale must be positive");
    }
    DenseMatrix out(rows, cols);
    for (double& x : out.data()) {
        x = scale * stream.normal();
    }
    return out;
}

DenseMatrix haar_orthogonal(std::size_t n, RandomStream& stream) {
    if (n == 0) {
        throw InvalidArgument("haar_orthogonal: n must be positive");
    }
    DenseMatrix r = normal_matrix(n, n, 1.0, stream);
    // Householder QR; reflectors stored as unit vectors.
    std::vector<std::vector<double>> reflectors;
    reflectors.reserve(n);
    std::vector<double> r_diag_sign(n, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> v(n - k);
        double norm_sq = 0.0;
        for (std::size_t i = k; i < n; ++i) {
            v[i - k] = r(i, k);
            norm_sq += v[i - k] * v[i - k];
        }
        const double norm = std::sqrt(norm_sq);
        if (norm == 0.0) {
            reflectors.emplace_back();
            continue;
        }
        const double alpha = v[0] >= 0.0 ? -norm : norm;
        v[0] -= alpha;
        double v_norm_sq = 0.0;
        for (double x : v) {
            v_norm_sq += x * x;
        }
        if (v_norm_sq == 0.0) {
            reflectors.emplace_back();
            r_diag_sign[k] = alpha >= 0.0 ? 1.0 : -1.0;
            continue;
        }
        const double inv = 1.0 / std::sqrt(v_norm_sq);
        for (double& x : v) {
            x *= inv;
        }
        for (std::size_t j = k; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = k; i < n; ++i) {
                dot += v[i - k] * r(i, j);
            }
            for (std::size_t i = k; i < n; ++i) {
                r(i, j) -= 2.0 * dot * v[i - k];
            }
        }
        r_diag_sign[k] = r(k, k) >= 0.0 ? 1.0 : -1.0;
        reflectors.push_back(std::move(v));
    }
    // Q = H_0 H_1 ... H_{n-1}, applied to the identity from the right-most factor.
    DenseMatrix q = DenseMatrix::identity(n);
    for (std::size_t kk = n; kk-- > 0;) {
        const auto& v = reflectors[kk];
        if (v.empty()) {
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = kk; i < n; ++i) {
                dot += v[i - kk] * q(i, j);
            }
            for (std::size_t i = kk; i < n; ++i) {
                q(i, j) -= 2.0 * dot * v[i - kk];
            }
        }
    }
    // Q diag(sign(R_kk)) so that R has a positive diagonal.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            q(i, j) *= r_diag_sign[j];
        }
    }
    return q;
}

namespace {

// Newton-Schulz polish X <- X (3I - X^T X) / 2, valid once X is close to
// orthogonal. Converges quadratically and needs only products.
bool schulz_polish(Eigen::MatrixXd& x) {
    const Eigen::Index d = x.cols();
    const double target = 1e-14 * std::sqrt(static_cast<double>(d));
    for (int it = 0; it < 8; ++it) {
        Eigen::MatrixXd e = x.transpose() * x;
        e.diagonal().array() -= 1.0;
        const double err = e.norm();
        if (!(err < 0.7)) {
            return false;
        }
        if (err <= target) {
            return true;
        }
        x -= 0.5 * (x * e);
    }
    return false;
}

// Scaled Newton on a square block, handing over to the Schulz polish once the
// relative change drops below 0.1. Returns false when the caller should fall
// back to the SVD route.
bool newton_polar_square(Eigen::MatrixXd& x) {
    constexpr int kMaxIterations = 60;
    for (int it = 0; it < kMaxIterations; ++it) {
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(x);
        if (!(lu.rcond() > 1e-15)) {
            return false;
        }
        const Eigen::MatrixXd inv_t = lu.inverse().transpose();
        const double zeta = std::sqrt(inv_t.norm() / x.norm());
        Eigen::MatrixXd next = 0.5 * (zeta * x + inv_t / zeta);
        const double delta = (next - x).norm() / next.norm();
        x.swap(next);
        if (!x.allFinite()) {
            return false;
        }
        if (delta < 1e-1) {
            Eigen::MatrixXd polished = x;
            if (schulz_polish(polished)) {
                x.swap(polished);
                return true;
            }
        }
    }
    return false;
}

} // namespace

DenseMatrix polar_factor_newton(const DenseMatrix& m) {
    if (m.empty()) {
        throw ShapeMismatch("polar_factor_newton: empty matrix");
    }
    if (!m.all_finite()) {
        throw NonFinite("polar_factor_newton: input contains NaN or Inf");
    }
    const bool wide = m.rows() < m.cols();
    const Eigen::MatrixXd tall = wide ? Eigen::MatrixXd(view(m).transpose()) : Eigen::MatrixXd(view(m));
    const Eigen::Index d = tall.cols();

    Eigen::MatrixXd factor;
    if (tall.rows() == d) {
        factor = tall;
        if (!newton_polar_square(factor)) {
            return polar_factor(m);
        }
    } else {
        // P(Q R) = Q P(R) for Q with orthonormal columns.
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(tall);
        Eigen::MatrixXd r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
        if (!newton_polar_square(r)) {
            return polar_factor(m);
        }
        factor = Eigen::MatrixXd::Identity(tall.rows(), d);
        factor.topRows(d) = r;
        factor.applyOnTheLeft(qr.householderQ());
    }
    DenseMatrix out(m.rows(), m.cols());
    if (wide) {
        view(out) = factor.transpose();
    } else {
        view(out) = factor;
    }
    return out;
}

} // namespace muonlab
