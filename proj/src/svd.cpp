#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "muonlab/errors.hpp"
#include "muonlab/linalg.hpp"

namespace muonlab {

namespace {

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

// (x, y) <- (c x - s y, s x + c y)
void rotate(double* x, double* y, std::size_t n, double c, double s) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

// Column-contiguous storage: column j lives at data[j * len, (j + 1) * len).
struct ColumnBlock {
    std::size_t len = 0;
    std::size_t count = 0;
    std::vector<double> data;

    double* col(std::size_t j) { return data.data() + j * len; }
    const double* col(std::size_t j) const { return data.data() + j * len; }
};

// Modified Gram-Schmidt of column j against columns [0, count) except j,
// falling back to unit vectors when the column has no usable content.
void orthonormalize_column(ColumnBlock& block, std::size_t j, const std::vector<bool>& fixed) {
    double* target = block.col(j);
    auto project_out = [&](double* v) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < block.count; ++k) {
                if (k == j || !fixed[k]) {
                    continue;
                }
                const double* other = block.col(k);
                const double coef = dot(v, other, block.len);
                for (std::size_t i = 0; i < block.len; ++i) {
                    v[i] -= coef * other[i];
                }
            }
        }
        return std::sqrt(dot(v, v, block.len));
    };
    std::vector<double> candidate(target, target + block.len);
    double norm = project_out(candidate.data());
    for (std::size_t e = 0; norm < 0.5 && e < block.len; ++e) {
        std::fill(candidate.begin(), candidate.end(), 0.0);
        candidate[e] = 1.0;
        norm = project_out(candidate.data());
    }
    for (std::size_t i = 0; i < block.len; ++i) {
        target[i] = candidate[i] / norm;
    }
}

// One-sided Jacobi on the columns of `work` (len x d). Rotations are
// accumulated into `right` (d x d, starts as identity). Returns sweeps used.
int jacobi_orthogonalize(ColumnBlock& work, ColumnBlock& right, const SvdOptions& options) {
    const std::size_t len = work.len;
    const std::size_t d = work.count;
    std::vector<double> norms(d);
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
        for (std::size_t j = 0; j < d; ++j) {
            norms[j] = dot(work.col(j), work.col(j), len);
        }
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double alpha = norms[p];
                const double beta = norms[q];
                if (alpha == 0.0 || beta == 0.0) {
                    continue;
                }
                const double gamma = dot(work.col(p), work.col(q), len);
                if (std::abs(gamma) <= options.tolerance * std::sqrt(alpha) * std::sqrt(beta)) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(work.col(p), work.col(q), len, c, s);
                rotate(right.col(p), right.col(q), d, c, s);
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        if (!rotated) {
            return sweep + 1;
        }
    }
    throw NonConvergence("svd: no convergence after " + std::to_string(options.max_sweeps) +
                         " Jacobi sweeps");
}

} // namespace

// Tall case T = M (or M^T when M is wide), len x d with len >= d:
//   T P = Q R                      (Householder QR with column pivoting)
//   R^T J = Uhat Sigma             (one-sided Jacobi, J accumulated)
// so T = (Q J) Sigma (P Uhat)^T. Jacobi on the triangular factor converges in
// a handful of sweeps because the pivoted R is strongly graded.
SvdResult svd(const DenseMatrix& m, const SvdOptions& options) {
    if (m.empty()) {
        throw ShapeMismatch("svd: empty matrix");
    }
    if (!m.all_finite()) {
        throw NonFinite("svd: input contains NaN or Inf");
    }
    const bool wide = m.rows() < m.cols();
    const auto len = static_cast<Eigen::Index>(wide ? m.cols() : m.rows());
    const auto d = static_cast<Eigen::Index>(wide ? m.rows() : m.cols());

    Eigen::MatrixXd tall(len, d);
    for (Eigen::Index i = 0; i < len; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            tall(i, j) = wide ? m(static_cast<std::size_t>(j), static_cast<std::size_t>(i))
                              : m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(tall);
    const Eigen::MatrixXd r = qr.matrixR().topRows(d).triangularView<Eigen::Upper>();

    // Columns of R^T are the rows of R.
    const auto ud = static_cast<std::size_t>(d);
    ColumnBlock work{ud, ud, std::vector<double>(ud * ud)};
    for (std::size_t i = 0; i < ud; ++i) {
        for (std::size_t j = 0; j < ud; ++j) {
            work.col(i)[j] = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    ColumnBlock right{ud, ud, std::vector<double>(ud * ud, 0.0)};
    for (std::size_t j = 0; j < ud; ++j) {
        right.col(j)[j] = 1.0;
    }
    const int sweeps = jacobi_orthogonalize(work, right, options);

    std::vector<double> sigma(ud);
    for (std::size_t j = 0; j < ud; ++j) {
        sigma[j] = std::sqrt(dot(work.col(j), work.col(j), ud));
    }
    std::vector<std::size_t> order(ud);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

    // Uhat columns, sorted; tiny ones get an orthonormal completion.
    ColumnBlock uhat{ud, ud, std::vector<double>(ud * ud, 0.0)};
    std::vector<double> sorted_sigma(ud);
    const double sigma_max = sigma[order.front()];
    std::vector<bool> fixed(ud, false);
    std::vector<std::size_t> needs_completion;
    for (std::size_t k = 0; k < ud; ++k) {
        const std::size_t j = order[k];
        sorted_sigma[k] = sigma[j];
        if (sigma[j] > 1e-300) {
            for (std::size_t i = 0; i < ud; ++i) {
                uhat.col(k)[i] = work.col(j)[i] / sigma[j];
            }
        }
        if (sigma[j] > options.tolerance * sigma_max && sigma[j] > 1e-300) {
            fixed[k] = true;
        } else {
            needs_completion.push_back(k);
        }
    }
    for (std::size_t k : needs_completion) {
        orthonormalize_column(uhat, k, fixed);
        fixed[k] = true;
    }

    // Left factor of T: Q * J (sorted). Right factor of T: P * Uhat.
    Eigen::MatrixXd j_sorted(d, d);
    Eigen::MatrixXd uhat_sorted(d, d);
    for (std::size_t k = 0; k < ud; ++k) {
        const double* jc = right.col(order[k]);
        const double* uc = uhat.col(k);
        for (std::size_t i = 0; i < ud; ++i) {
            j_sorted(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = jc[i];
            uhat_sorted(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = uc[i];
        }
    }
    Eigen::MatrixXd left = Eigen::MatrixXd::Identity(len, d);
    left.topRows(d) = j_sorted;
    left.applyOnTheLeft(qr.householderQ());
    const Eigen::MatrixXd rightv = qr.colsPermutation() * uhat_sorted;

    auto to_dense = [](const Eigen::MatrixXd& e) {
        DenseMatrix out(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
        for (Eigen::Index i = 0; i < e.rows(); ++i) {
            for (Eigen::Index j = 0; j < e.cols(); ++j) {
                out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = e(i, j);
            }
        }
        return out;
    };

    SvdResult out;
    out.sweeps = sweeps;
    out.singular_values = std::move(sorted_sigma);
    if (wide) {
        out.U = to_dense(rightv);
        out.V = to_dense(left);
    } else {
        out.U = to_dense(left);
        out.V = to_dense(rightv);
    }
    return out;
}

DenseMatrix polar_factor(const DenseMatrix& m) {
    const SvdResult f = svd(m);
    return matmul_nt(f.U, f.V);
}

} // namespace muonlab
