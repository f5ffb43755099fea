#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "perimts/errors.hpp"
#include "perimts/parallel.hpp"

namespace perimts {

using Vector = std::vector<double>;

inline double dot(const Vector& a, const Vector& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vector& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline void axpy(double alpha, const Vector& x, Vector& y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vector& x, double alpha) {
    for (double& v : x) v *= alpha;
}

// Row-major dense matrix. Used for element blocks, the interface system and
// unit-response column blocks; sized well below the sparse operators.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }

    void set_zero() { std::fill(a_.begin(), a_.end(), 0.0); }

    Vector multiply(const Vector& x) const {
        assert(x.size() == cols_);
        Vector y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            const double* row = a_.data() + i * cols_;
            for (std::size_t j = 0; j < cols_; ++j) s += row[j] * x[j];
            y[i] = s;
        }
        return y;
    }

    DenseMatrix transposed() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

struct Triplet {
    int row;
    int col;
    double value;
};

// Compressed-sparse-row symmetric-capable matrix. Assembled from triplets;
// duplicates are summed. Pattern is frozen after finalize so damage-driven
// value updates never reallocate.
class SparseMatrix {
public:
    SparseMatrix() = default;
    explicit SparseMatrix(int n) : n_(n) {}

    int size() const { return n_; }

    static SparseMatrix from_triplets(int n, const std::vector<Triplet>& triplets,
                                      bool symmetric = false) {
        SparseMatrix m(n);
        m.symmetric_ = symmetric;
        std::vector<int> count(n, 0);
        for (const auto& t : triplets) {
            if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
                throw ConfigError("sparse assembly: index (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ") out of range for n=" +
                                  std::to_string(n));
            ++count[t.row];
        }
        m.row_ptr_.assign(n + 1, 0);
        for (int i = 0; i < n; ++i) m.row_ptr_[i + 1] = m.row_ptr_[i] + count[i];
        std::vector<int> cursor(m.row_ptr_.begin(), m.row_ptr_.end() - 1);
        std::vector<int> cols(triplets.size());
        std::vector<double> vals(triplets.size());
        for (const auto& t : triplets) {
            const int p = cursor[t.row]++;
            cols[p] = t.col;
            vals[p] = t.value;
        }
        // per-row sort then in-place duplicate merge, dropping exact zeros
        m.col_.reserve(triplets.size());
        m.val_.reserve(triplets.size());
        std::vector<int> final_ptr(n + 1, 0);
        std::vector<std::pair<int, double>> row;
        for (int i = 0; i < n; ++i) {
            row.clear();
            for (int p = m.row_ptr_[i]; p < m.row_ptr_[i + 1]; ++p)
                row.emplace_back(cols[p], vals[p]);
            std::sort(row.begin(), row.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::size_t w = 0;
            for (std::size_t r = 0; r < row.size(); ++r) {
                if (w > 0 && row[w - 1].first == row[r].first) {
                    row[w - 1].second += row[r].second;
                } else {
                    row[w++] = row[r];
                }
            }
            for (std::size_t r = 0; r < w; ++r) {
                if (row[r].second == 0.0) continue;
                m.col_.push_back(row[r].first);
                m.val_.push_back(row[r].second);
            }
            final_ptr[i + 1] = static_cast<int>(m.col_.size());
        }
        m.row_ptr_ = std::move(final_ptr);
        return m;
    }

    // Pattern-preserving variant: keeps structurally-present zeros so later
    // add_at() calls always find their slot.
    static SparseMatrix from_triplets_keep_pattern(int n, const std::vector<Triplet>& triplets,
                                                   bool symmetric = false) {
        SparseMatrix m = from_triplets_impl(n, triplets);
        m.symmetric_ = symmetric;
        return m;
    }

    // Builds a zero matrix over a block pattern: for every node pair in the
    // adjacency list, all block*block dof entries are present. Column lists
    // must be sorted and unique.
    static SparseMatrix from_node_pattern(int n_nodes, int block,
                                          const std::vector<std::vector<int>>& node_adjacency,
                                          bool symmetric = false) {
        SparseMatrix m(n_nodes * block);
        m.symmetric_ = symmetric;
        m.row_ptr_.assign(m.n_ + 1, 0);
        std::size_t total = 0;
        for (int a = 0; a < n_nodes; ++a) total += node_adjacency[a].size() * block * block;
        m.col_.reserve(total);
        for (int a = 0; a < n_nodes; ++a) {
            for (int c = 0; c < block; ++c) {
                for (int b : node_adjacency[a])
                    for (int cc = 0; cc < block; ++cc) m.col_.push_back(b * block + cc);
                m.row_ptr_[a * block + c + 1] = static_cast<int>(m.col_.size());
            }
        }
        m.val_.assign(m.col_.size(), 0.0);
        return m;
    }

    int nnz() const { return static_cast<int>(col_.size()); }
    bool symmetric() const { return symmetric_; }

    double coeff(int i, int j) const {
        for (int p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            if (col_[p] == j) return val_[p];
        return 0.0;
    }

    // Adds into an existing slot; the pattern must already contain (i, j).
    void add_at(int i, int j, double v) {
        const int lo = row_ptr_[i], hi = row_ptr_[i + 1];
        const int* base = col_.data();
        const int* it = std::lower_bound(base + lo, base + hi, j);
        if (it == base + hi || *it != j)
            throw InternalError("sparse update outside the assembled pattern at (" +
                                std::to_string(i) + "," + std::to_string(j) + ")");
        val_[it - base] += v;
    }

    void multiply(const Vector& x, Vector& y) const {
        assert(static_cast<int>(x.size()) == n_ && static_cast<int>(y.size()) == n_);
        const int* rp = row_ptr_.data();
        const int* ci = col_.data();
        const double* v = val_.data();
        const double* xp = x.data();
        double* yp = y.data();
        parallel_for(0, static_cast<std::size_t>(n_), [&](std::size_t i) {
            double s = 0.0;
            for (int p = rp[i]; p < rp[i + 1]; ++p) s += v[p] * xp[ci[p]];
            yp[i] = s;
        }, 2048);
    }

    Vector multiply(const Vector& x) const {
        Vector y(n_);
        multiply(x, y);
        return y;
    }

    Vector diagonal() const {
        Vector d(n_, 0.0);
        for (int i = 0; i < n_; ++i) d[i] = coeff(i, i);
        return d;
    }

    DenseMatrix to_dense() const {
        DenseMatrix d(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) d(i, col_[p]) = val_[p];
        return d;
    }

    const std::vector<int>& row_ptr() const { return row_ptr_; }
    const std::vector<int>& col_idx() const { return col_; }
    const std::vector<double>& values() const { return val_; }
    std::vector<double>& values() { return val_; }

private:
    static SparseMatrix from_triplets_impl(int n, const std::vector<Triplet>& triplets) {
        SparseMatrix m(n);
        std::vector<int> count(n, 0);
        for (const auto& t : triplets) {
            if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
                throw ConfigError("sparse assembly: index out of range");
            ++count[t.row];
        }
        m.row_ptr_.assign(n + 1, 0);
        for (int i = 0; i < n; ++i) m.row_ptr_[i + 1] = m.row_ptr_[i] + count[i];
        std::vector<int> cursor(m.row_ptr_.begin(), m.row_ptr_.end() - 1);
        std::vector<int> cols(triplets.size());
        std::vector<double> vals(triplets.size());
        for (const auto& t : triplets) {
            const int p = cursor[t.row]++;
            cols[p] = t.col;
            vals[p] = t.value;
        }
        std::vector<int> final_ptr(n + 1, 0);
        std::vector<std::pair<int, double>> row;
        for (int i = 0; i < n; ++i) {
            row.clear();
            for (int p = m.row_ptr_[i]; p < m.row_ptr_[i + 1]; ++p)
                row.emplace_back(cols[p], vals[p]);
            std::sort(row.begin(), row.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::size_t w = 0;
            for (std::size_t r = 0; r < row.size(); ++r) {
                if (w > 0 && row[w - 1].first == row[r].first) {
                    row[w - 1].second += row[r].second;
                } else {
                    row[w++] = row[r];
                }
            }
            for (std::size_t r = 0; r < w; ++r) {
                m.col_.push_back(row[r].first);
                m.val_.push_back(row[r].second);
            }
            final_ptr[i + 1] = static_cast<int>(m.col_.size());
        }
        m.row_ptr_ = std::move(final_ptr);
        return m;
    }

    int n_ = 0;
    bool symmetric_ = false;
    std::vector<int> row_ptr_{0};
    std::vector<int> col_;
    std::vector<double> val_;
};

struct CgResult {
    int iterations = 0;
    double residual = 0.0;
};

// Preconditioned conjugate gradient; A supplied as a callable y = A(x) so
// boundary projections and matrix-free operators plug in unchanged.
// jacobi may be empty (identity preconditioner). x holds the initial guess.
template <class ApplyA>
CgResult cg_solve(ApplyA&& apply_a, const Vector& b, Vector& x, double rel_tol, int max_iter,
                  const Vector& jacobi = {}) {
    const std::size_t n = b.size();
    assert(x.size() == n);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return {0, 0.0};
    }
    Vector r(n), z(n), p(n), ap(n);
    apply_a(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    auto precond = [&](const Vector& in, Vector& out) {
        if (jacobi.empty()) {
            out = in;
        } else {
            for (std::size_t i = 0; i < n; ++i)
                out[i] = jacobi[i] != 0.0 ? in[i] / jacobi[i] : in[i];
        }
    };
    precond(r, z);
    p = z;
    double rz = dot(r, z);
    double rnorm = norm2(r);
    int it = 0;
    while (rnorm / bnorm > rel_tol) {
        if (it >= max_iter)
            throw SolverError("cg: no convergence after " + std::to_string(max_iter) +
                              " iterations, residual " + std::to_string(rnorm / bnorm));
        apply_a(p, ap);
        const double pap = dot(p, ap);
        if (pap <= 0.0)
            throw SolverError("cg: operator not positive definite (p'Ap = " +
                              std::to_string(pap) + ")");
        const double alpha = rz / pap;
        axpy(alpha, p, x);
        axpy(-alpha, ap, r);
        precond(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        rz = rz_new;
        rnorm = norm2(r);
        ++it;
    }
    return {it, rnorm / bnorm};
}

inline CgResult cg_solve(const SparseMatrix& a, const Vector& b, Vector& x, double rel_tol,
                         int max_iter, const Vector& jacobi = {}) {
    return cg_solve([&](const Vector& in, Vector& out) { a.multiply(in, out); }, b, x, rel_tol,
                    max_iter, jacobi);
}

// LU with partial pivoting, kept for repeated right-hand sides (the interface
// system is factored once per damage state).
class DenseLu {
public:
    DenseLu() = default;

    explicit DenseLu(DenseMatrix a) : lu_(std::move(a)) {
        const std::size_t n = lu_.rows();
        if (n != lu_.cols()) throw InternalError("dense factor: matrix not square");
        double amax = lu_.max_abs();
        perm_.resize(n);
        for (std::size_t i = 0; i < n; ++i) perm_[i] = static_cast<int>(i);
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t piv = k;
            double best = std::abs(lu_(k, k));
            for (std::size_t i = k + 1; i < n; ++i) {
                const double v = std::abs(lu_(i, k));
                if (v > best) {
                    best = v;
                    piv = i;
                }
            }
            if (best <= 1e-14 * std::max(amax, 1e-300))
                throw SolverError("dense factor: numerically singular at pivot " +
                                  std::to_string(k));
            if (piv != k) {
                std::swap(perm_[k], perm_[piv]);
                for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
            }
            const double inv = 1.0 / lu_(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const double f = lu_(i, k) * inv;
                lu_(i, k) = f;
                if (f == 0.0) continue;
                for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
            }
        }
    }

    std::size_t size() const { return lu_.rows(); }

    Vector solve(const Vector& b) const {
        const std::size_t n = lu_.rows();
        assert(b.size() == n);
        Vector x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
        for (std::size_t i = 1; i < n; ++i) {
            double s = x[i];
            for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
            x[i] = s;
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x[ii];
            for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x[j];
            x[ii] = s / lu_(ii, ii);
        }
        return x;
    }

private:
    DenseMatrix lu_;
    std::vector<int> perm_;
};

// Solves A X = B column by column (B dense, columns independent).
inline DenseMatrix dense_factor_solve(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw InternalError("dense solve: shape mismatch");
    DenseLu lu(a);
    DenseMatrix x(b.rows(), b.cols());
    Vector col(b.rows());
    for (std::size_t j = 0; j < b.cols(); ++j) {
        for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
        Vector sol = lu.solve(col);
        for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
    }
    return x;
}

inline Vector dense_factor_solve(const DenseMatrix& a, const Vector& b) {
    return DenseLu(a).solve(b);
}

// Cyclic Jacobi eigenvalue iteration for small symmetric matrices (element
// block null-space checks, material matrix spectra).
inline Vector symmetric_eigenvalues(DenseMatrix a, int sweeps = 50) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw InternalError("eigenvalues: matrix not square");
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-28 * std::max(1.0, a.max_abs() * a.max_abs())) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    Vector ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

}  // namespace perimts
