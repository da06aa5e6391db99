#pragma once

#include "unidiff/errors.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace unidiff {

/// Grid function over the free (non-Dirichlet) unknowns.
using Field = std::vector<double>;

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/**
 * Symmetric sparse matrix in compressed-row storage.
 *
 * Besides the CSR arrays each row keeps its exact row sum (`row_sum`). The
 * product is evaluated in difference form
 *
 *     (A x)_i = row_sum_i x_i + sum_{j != i} a_ij (x_j - x_i)
 *
 * so an operator assembled with exact zero row sums annihilates constants
 * exactly, independent of floating-point summation order.
 */
class SparseOperator {
public:
    SparseOperator() = default;

    /// Duplicate entries are summed. Every row gets an explicit diagonal slot.
    static SparseOperator from_triplets(std::size_t n, std::vector<Triplet> entries) {
        for (const auto& t : entries) {
            if (t.row >= n || t.col >= n) {
                throw DimensionError("triplet index out of range");
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            entries.push_back({i, i, 0.0});
        }
        std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
            return std::tie(a.row, a.col) < std::tie(b.row, b.col);
        });

        SparseOperator op;
        op.n_ = n;
        op.row_ptr_.assign(n + 1, 0);
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& t = entries[k];
            if (k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
                op.vals_.back() += t.value;
                continue;
            }
            op.cols_.push_back(t.col);
            op.vals_.push_back(t.value);
            ++op.row_ptr_[t.row + 1];
        }
        for (std::size_t i = 0; i < n; ++i) {
            op.row_ptr_[i + 1] += op.row_ptr_[i];
        }
        op.index_diagonals();
        op.stamp_ = next_stamp();
        op.pattern_stamp_ = op.stamp_;
        op.row_sum_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t p = op.row_ptr_[i]; p < op.row_ptr_[i + 1]; ++p) {
                s += op.vals_[p];
            }
            op.row_sum_[i] = s;
        }
        return op;
    }

    /// Builds from CSR arrays whose rows are column-sorted and contain their diagonal.
    static SparseOperator from_csr(std::size_t n, std::vector<std::size_t> row_ptr,
                                   std::vector<std::size_t> cols, std::vector<double> vals,
                                   std::vector<double> row_sum) {
        SparseOperator op;
        op.n_ = n;
        op.row_ptr_ = std::move(row_ptr);
        op.cols_ = std::move(cols);
        op.vals_ = std::move(vals);
        op.row_sum_ = std::move(row_sum);
        if (op.row_ptr_.size() != n + 1 || op.cols_.size() != op.vals_.size() ||
            op.row_sum_.size() != n || op.row_ptr_.back() != op.vals_.size()) {
            throw DimensionError("inconsistent CSR arrays");
        }
        op.index_diagonals();
        op.stamp_ = next_stamp();
        op.pattern_stamp_ = op.stamp_;
        return op;
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t nonzeros() const noexcept { return vals_.size(); }

    std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
    std::span<const std::size_t> cols() const noexcept { return cols_; }
    std::span<const double> values() const noexcept { return vals_; }
    std::span<const double> row_sums() const noexcept { return row_sum_; }

    double diagonal(std::size_t i) const { return vals_[diag_[i]]; }

    double at(std::size_t i, std::size_t j) const {
        const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        const auto it = std::lower_bound(first, last, j);
        if (it == last || *it != j) {
            return 0.0;
        }
        return vals_[static_cast<std::size_t>(it - cols_.begin())];
    }

    void apply(std::span<const double> x, std::span<double> y) const {
        check_size(x.size());
        check_size(y.size());
        for (std::size_t i = 0; i < n_; ++i) {
            const double xi = x[i];
            double acc = 0.0;
            // The diagonal term contributes a_ii (x_i − x_i) = 0 exactly.
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                acc += vals_[p] * (x[cols_[p]] - xi);
            }
            y[i] = row_sum_[i] * xi + acc;
        }
    }

    Field apply(std::span<const double> x) const {
        Field y(n_);
        apply(x, y);
        return y;
    }

    /// Euclidean quadratic form xᵀAx.
    double quadratic_form(std::span<const double> x) const {
        const Field ax = apply(x);
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            s += ax[i] * x[i];
        }
        return s;
    }

    /// Exact (bitwise) symmetry of the stored coefficients.
    bool is_symmetric() const {
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                if (at(cols_[p], i) != vals_[p]) {
                    return false;
                }
            }
        }
        return true;
    }

    /// Positive diagonal, non-positive off-diagonal, weakly diagonally dominant rows.
    bool has_m_matrix_sign_pattern() const {
        for (std::size_t i = 0; i < n_; ++i) {
            if (!(diagonal(i) > 0.0) || row_sum_[i] < 0.0) {
                return false;
            }
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                if (cols_[p] != i && vals_[p] > 0.0) {
                    return false;
                }
            }
        }
        return true;
    }

    /// Returns this + diag(d).
    SparseOperator plus_diagonal(std::span<const double> d) const {
        check_size(d.size());
        SparseOperator out = *this;
        for (std::size_t i = 0; i < n_; ++i) {
            out.vals_[diag_[i]] += d[i];
            out.row_sum_[i] += d[i];
        }
        out.stamp_ = next_stamp();
        return out;
    }

    /// Column-major Eigen copy. Symmetry makes the CSR arrays valid CSC arrays.
    Eigen::SparseMatrix<double> to_eigen() const {
        Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(vals_.size());
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                trips.emplace_back(static_cast<int>(i), static_cast<int>(cols_[p]), vals_[p]);
            }
        }
        m.setFromTriplets(trips.begin(), trips.end());
        return m;
    }

    /// Identifies the stored values: copies share it, new operators get a fresh one.
    std::uint64_t stamp() const noexcept { return stamp_; }
    /// Identifies the sparsity pattern; `plus_diagonal` keeps it.
    std::uint64_t pattern_stamp() const noexcept { return pattern_stamp_; }

    friend bool operator==(const SparseOperator& a, const SparseOperator& b) {
        return a.n_ == b.n_ && a.row_ptr_ == b.row_ptr_ && a.cols_ == b.cols_ &&
               a.vals_ == b.vals_ && a.row_sum_ == b.row_sum_;
    }

private:
    static std::uint64_t next_stamp() {
        static std::atomic<std::uint64_t> counter{0};
        return ++counter;
    }

    void index_diagonals() {
        diag_.assign(n_, 0);
        for (std::size_t i = 0; i < n_; ++i) {
            bool found = false;
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                if (cols_[p] == i) {
                    diag_[i] = p;
                    found = true;
                }
            }
            if (!found) {
                throw DimensionError("row " + std::to_string(i) + " has no diagonal entry");
            }
        }
    }

    void check_size(std::size_t m) const {
        if (m != n_) {
            throw DimensionError("vector length " + std::to_string(m) + " does not match operator size " +
                                 std::to_string(n_));
        }
    }

    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
    std::vector<double> row_sum_;
    std::vector<std::size_t> diag_;
    std::uint64_t stamp_ = 0;
    std::uint64_t pattern_stamp_ = 0;
};

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

} // namespace unidiff
