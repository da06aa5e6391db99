#pragma once

#include "unidiff/errors.hpp"
#include "unidiff/report.hpp"
#include "unidiff/sparse.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace unidiff {

/**
 * Discrete obstacle problem: minimise ½ vᵀAv − bᵀv over {v ≥ ψ}.
 *
 * A is a symmetric positive definite M-matrix, so the constraint set
 * {Av ≥ b} is read componentwise and the problem is the linear
 * complementarity system
 *
 *     u ≥ ψ,   λ := Au − b ≥ 0,   λ_i (u_i − ψ_i) = 0.
 */
struct ObstacleProblem {
    SparseOperator A;
    Field b;
    Field psi;
    /// Aψ.
    Field fhat;
    /// Weight of the Euclidean pairing in reported inner products (h^dim on grids).
    double cell_volume = 1.0;

    std::size_t size() const noexcept { return b.size(); }

    /// max(1, ‖b‖∞); every residual tolerance is relative to it.
    double scale() const { return std::max(1.0, max_abs(b)); }
};

inline ObstacleProblem make_obstacle_problem(SparseOperator A, Field b, Field psi, double cell_volume = 1.0) {
    if (b.size() != A.size() || psi.size() != A.size()) {
        throw DimensionError("obstacle problem: A is " + std::to_string(A.size()) + ", b has " +
                             std::to_string(b.size()) + ", psi has " + std::to_string(psi.size()));
    }
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (!(A.diagonal(i) > 0.0)) {
            throw DimensionError("obstacle problem: non-positive diagonal in row " + std::to_string(i));
        }
    }
    ObstacleProblem p;
    p.fhat = A.apply(psi);
    p.A = std::move(A);
    p.b = std::move(b);
    p.psi = std::move(psi);
    p.cell_volume = cell_volume;
    return p;
}

struct KKTResiduals {
    double feasibility = 0.0;     ///< max(ψ − u)₊
    double dual = 0.0;            ///< max(b − Au)₊
    double complementarity = 0.0; ///< max |(Au − b)_i (u − ψ)_i|
    double k2_upper = 0.0;        ///< max(Au − (b ∨ Aψ))₊
    double scale = 1.0;

    double worst() const { return std::max({feasibility, dual, complementarity, k2_upper}); }
    bool within(double tol) const { return worst() <= tol * scale; }
};

/// Residuals of `u` given the product `au` = Au.
inline KKTResiduals kkt_residuals(const ObstacleProblem& p, std::span<const double> u, std::span<const double> au) {
    if (u.size() != p.size() || au.size() != p.size()) {
        throw DimensionError("iterate size does not match obstacle problem");
    }
    KKTResiduals r;
    r.scale = p.scale();
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double lambda = au[i] - p.b[i];
        const double gap = u[i] - p.psi[i];
        r.feasibility = std::max(r.feasibility, -gap);
        r.dual = std::max(r.dual, -lambda);
        r.complementarity = std::max(r.complementarity, std::abs(lambda * gap));
        r.k2_upper = std::max(r.k2_upper, au[i] - std::max(p.b[i], p.fhat[i]));
    }
    return r;
}

inline KKTResiduals kkt_residuals(const ObstacleProblem& p, std::span<const double> u) {
    if (u.size() != p.size()) {
        throw DimensionError("iterate size does not match obstacle problem");
    }
    return kkt_residuals(p, u, p.A.apply(u));
}

/// ½ vᵀAv − bᵀv.
inline double objective(const ObstacleProblem& p, std::span<const double> v) {
    double bv = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        bv += p.b[i] * v[i];
    }
    return 0.5 * p.A.quadratic_form(v) - bv;
}

struct ObstacleSolution {
    Field u;
    /// u_i pinned to ψ_i.
    std::vector<bool> active;
    int iterations = 0;
    KKTResiduals kkt;
    /// Number of active sets that passed the KKT test (enumeration only).
    std::size_t passing_active_sets = 1;

    std::size_t active_count() const { return static_cast<std::size_t>(std::count(active.begin(), active.end(), true)); }
};

enum class Method { Psor, Pdas };

inline const char* to_string(Method m) { return m == Method::Psor ? "psor" : "pdas"; }

struct SolverOptions {
    double tol = 1e-10;
    /// 0 selects the method default: 200000 PSOR sweeps, or max(500, n + 2) PDAS iterations
    /// (PDAS on an M-matrix terminates within n + 1).
    int max_iter = 0;
    double omega = 1.5;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, KKTResiduals residuals, int iterations, Field iterate)
        : Error(what), residuals_(residuals), iterations_(iterations), iterate_(std::move(iterate)) {}

    const KKTResiduals& residuals() const noexcept { return residuals_; }
    int iterations() const noexcept { return iterations_; }
    const Field& iterate() const noexcept { return iterate_; }

private:
    KKTResiduals residuals_;
    int iterations_;
    Field iterate_;
};

namespace detail {

inline Field feasible_start(const ObstacleProblem& p, std::optional<std::span<const double>> start) {
    Field u = p.psi;
    if (start) {
        if (start->size() != p.size()) {
            throw DimensionError("initial guess size does not match obstacle problem");
        }
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] = std::max((*start)[i], p.psi[i]);
        }
    }
    return u;
}

inline std::vector<bool> pinned(const ObstacleProblem& p, std::span<const double> u, double band) {
    std::vector<bool> active(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        active[i] = u[i] - p.psi[i] <= band;
    }
    return active;
}

inline void validate(const SolverOptions& opt) {
    if (!(opt.tol > 0.0)) {
        throw ConfigError("solver tolerance must be positive");
    }
    if (opt.max_iter < 0) {
        throw ConfigError("max_iter must be non-negative");
    }
}

} // namespace detail

/**
 * Projected SOR. Sweeps rows in index order:
 *
 *     u_i ← max(ψ_i, u_i + ω (b_i − (Au)_i) / a_ii)
 *
 * until every KKT residual is below tol·scale, then keeps sweeping while the
 * residual still improves. The scaled residual hides error in λ = W g at
 * nodes with small weight, so polishing runs to the rounding floor.
 */
inline ObstacleSolution solve_psor(const ObstacleProblem& p, const SolverOptions& opt = {},
                                   std::optional<std::span<const double>> start = std::nullopt) {
    detail::validate(opt);
    if (!(opt.omega > 0.0 && opt.omega < 2.0)) {
        throw ConfigError("PSOR relaxation must lie in (0, 2)");
    }
    const int max_iter = opt.max_iter > 0 ? opt.max_iter : 200000;
    const auto row_ptr = p.A.row_ptr();
    const auto cols = p.A.cols();
    const auto vals = p.A.values();

    Field u = detail::feasible_start(p, start);
    auto sweep = [&] {
        for (std::size_t i = 0; i < u.size(); ++i) {
            double s = p.b[i];
            for (std::size_t q = row_ptr[i]; q < row_ptr[i + 1]; ++q) {
                s -= vals[q] * u[cols[q]];
            }
            u[i] = std::max(p.psi[i], u[i] + opt.omega * s / p.A.diagonal(i));
        }
    };

    KKTResiduals r = kkt_residuals(p, u);
    int it = 0;
    while (!r.within(opt.tol)) {
        if (it == max_iter) {
            throw ConvergenceError("PSOR did not converge in " + std::to_string(max_iter) + " sweeps", r, it,
                                   std::move(u));
        }
        sweep();
        ++it;
        r = kkt_residuals(p, u);
    }

    // Polishing: stop after 10 sweeps without improvement.
    Field best = u;
    KKTResiduals best_r = r;
    for (int stalled = 0; stalled < 10 && it < max_iter;) {
        sweep();
        ++it;
        r = kkt_residuals(p, u);
        if (r.worst() < best_r.worst()) {
            best = u;
            best_r = r;
            stalled = 0;
        } else {
            ++stalled;
        }
    }
    return {best, detail::pinned(p, best, opt.tol * best_r.scale), it, best_r, 1};
}

/**
 * Sparse LDLᵀ of A with the rows and columns of an active set replaced by
 * their diagonal. The sparsity pattern never changes, so the symbolic
 * analysis is done once per operator pattern and the numeric factorization is
 * reused while the masked values are unchanged (e.g. across time steps with a
 * stable contact set).
 */
class PdasWorkspace {
public:
    /// Solves the masked system into `x`; `active[i] != 0` marks pinned rows.
    void solve_masked(const SparseOperator& A, const std::vector<char>& active, std::span<const double> rhs,
                      std::span<double> x) {
        const auto row_ptr = A.row_ptr();
        const auto cols = A.cols();
        const auto vals = A.values();

        if (!same_pattern(A)) {
            matrix_ = A.to_eigen();
            matrix_.makeCompressed();
            pattern_stamp_ = A.pattern_stamp();
            size_ = A.size();
            ldlt_.analyzePattern(matrix_);
            factored_ = false;
        }

        const bool same_values = factored_ && A.stamp() == stamp_ && active == active_;
        if (!same_values) {
            double* masked = matrix_.valuePtr();
            for (std::size_t i = 0; i < A.size(); ++i) {
                for (std::size_t q = row_ptr[i]; q < row_ptr[i + 1]; ++q) {
                    const std::size_t j = cols[q];
                    masked[q] = (i != j && (active[i] || active[j])) ? 0.0 : vals[q];
                }
            }
            ldlt_.factorize(matrix_);
            if (ldlt_.info() != Eigen::Success) {
                factored_ = false;
                throw Error("sparse LDLT factorization failed; operator is not positive definite");
            }
            stamp_ = A.stamp();
            active_ = active;
            factored_ = true;
            ++factorizations_;
            extract_factor();
        }

        triangular_solves(rhs, x);
    }

    Field solve_masked(const SparseOperator& A, const std::vector<bool>& active, std::span<const double> rhs) {
        Field x(rhs.size());
        solve_masked(A, std::vector<char>(active.begin(), active.end()), rhs, x);
        return x;
    }

    std::size_t factorizations() const noexcept { return factorizations_; }

private:
    // Copies P, D⁻¹ and L out of the factorization. The forward pass runs on a
    // row-major copy of L, so both passes are gathers; each uses four partial
    // sums to break the floating-point dependency chain.
    void extract_factor() {
        const auto& L = ldlt_.matrixL().nestedExpression();
        const auto& perm = ldlt_.permutationP().indices();
        const auto n = static_cast<std::size_t>(L.cols());
        perm_.assign(perm.data(), perm.data() + n);
        // vectorD() returns by value; copy it once.
        const Eigen::VectorXd d = ldlt_.vectorD();
        inv_d_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            inv_d_[i] = 1.0 / d(static_cast<Eigen::Index>(i));
        }
        col_ptr_.assign(L.outerIndexPtr(), L.outerIndexPtr() + n + 1);
        col_rows_.assign(L.innerIndexPtr(), L.innerIndexPtr() + L.nonZeros());
        col_vals_.assign(L.valuePtr(), L.valuePtr() + L.nonZeros());
        const Eigen::SparseMatrix<double, Eigen::RowMajor> rows = L;
        row_ptr_.assign(rows.outerIndexPtr(), rows.outerIndexPtr() + n + 1);
        row_cols_.assign(rows.innerIndexPtr(), rows.innerIndexPtr() + rows.nonZeros());
        row_vals_.assign(rows.valuePtr(), rows.valuePtr() + rows.nonZeros());
        y_.resize(n);
    }

    static double sparse_dot(const int* idx, const double* val, int first, int last, const double* y) {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        int p = first;
        for (; p + 4 <= last; p += 4) {
            s0 += val[p] * y[idx[p]];
            s1 += val[p + 1] * y[idx[p + 1]];
            s2 += val[p + 2] * y[idx[p + 2]];
            s3 += val[p + 3] * y[idx[p + 3]];
        }
        for (; p < last; ++p) {
            s0 += val[p] * y[idx[p]];
        }
        return (s0 + s1) + (s2 + s3);
    }

    // x = P⁻¹ L⁻ᵀ D⁻¹ L⁻¹ P rhs.
    void triangular_solves(std::span<const double> rhs, std::span<double> x) {
        const std::size_t n = perm_.size();
        double* y = y_.data();
        for (std::size_t i = 0; i < n; ++i) {
            y[perm_[i]] = rhs[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            y[i] -= sparse_dot(row_cols_.data(), row_vals_.data(), row_ptr_[i], row_ptr_[i + 1], y);
        }
        for (std::size_t i = 0; i < n; ++i) {
            y[i] *= inv_d_[i];
        }
        for (std::size_t j = n; j-- > 0;) {
            y[j] -= sparse_dot(col_rows_.data(), col_vals_.data(), col_ptr_[j], col_ptr_[j + 1], y);
        }
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = y[perm_[i]];
        }
    }

    bool same_pattern(const SparseOperator& A) const {
        return pattern_stamp_ != 0 && A.pattern_stamp() == pattern_stamp_ && A.size() == size_;
    }

    // Matrix values are stored in the same order as the CSR arrays of the source
    // operator: it is symmetric, so its CSR is the CSC of the Eigen matrix.
    Eigen::SparseMatrix<double> matrix_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    std::uint64_t pattern_stamp_ = 0;
    std::size_t size_ = 0;
    std::uint64_t stamp_ = 0;
    std::vector<char> active_;
    std::vector<int> perm_;
    std::vector<double> inv_d_;
    std::vector<int> col_ptr_, col_rows_, row_ptr_, row_cols_;
    std::vector<double> col_vals_, row_vals_, y_;
    bool factored_ = false;
    std::size_t factorizations_ = 0;
};

namespace detail {

// Masked right-hand side: ψ scaled by the diagonal on active rows, b minus the
// active columns' contribution elsewhere.
inline void assemble_rhs(const ObstacleProblem& p, const std::vector<char>& active, Field& rhs) {
    const auto row_ptr = p.A.row_ptr();
    const auto cols = p.A.cols();
    const auto vals = p.A.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (active[i]) {
            rhs[i] = p.A.diagonal(i) * p.psi[i];
            continue;
        }
        double s = p.b[i];
        for (std::size_t q = row_ptr[i]; q < row_ptr[i + 1]; ++q) {
            if (active[cols[q]]) {
                s -= vals[q] * p.psi[cols[q]];
            }
        }
        rhs[i] = s;
    }
}

} // namespace detail

/**
 * Primal-dual active set method.
 *
 * Each iteration pins u = ψ on the active set, solves (Au − b)_i = 0 on the
 * rest, and updates the guess from λ = Au − b. Nodes near degenerate contact
 * keep their flag inside a dead band of width tol·scale, so the terminal set
 * is a fixed point of the update.
 */
inline ObstacleSolution solve_pdas(const ObstacleProblem& p, const SolverOptions& opt, PdasWorkspace& ws,
                                   std::optional<std::span<const double>> start = std::nullopt) {
    detail::validate(opt);
    const int max_iter = opt.max_iter > 0 ? opt.max_iter : static_cast<int>(std::max<std::size_t>(500, p.size() + 2));
    const std::size_t n = p.size();
    const double band = opt.tol * p.scale();

    Field u = detail::feasible_start(p, start);
    // Starting on the obstacle (the usual warm start) reuses Aψ.
    Field lambda = u == p.psi ? p.fhat : p.A.apply(u);
    Field au(n);
    std::vector<char> active(n);
    for (std::size_t i = 0; i < n; ++i) {
        lambda[i] -= p.b[i];
        active[i] = lambda[i] / p.A.diagonal(i) + p.psi[i] - u[i] > 0.0;
    }

    Field rhs(n);
    Field correction(n);
    KKTResiduals r;
    for (int it = 1; it <= max_iter; ++it) {
        if (std::find(active.begin(), active.end(), char{1}) == active.end()) {
            std::copy(p.b.begin(), p.b.end(), rhs.begin());
        } else {
            detail::assemble_rhs(p, active, rhs);
        }
        ws.solve_masked(p.A, active, rhs, u);
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i]) {
                u[i] = p.psi[i];
            }
        }
        p.A.apply(u, au);
        // Iterative refinement on the free rows; ill-conditioned operators leave residuals above the band.
        double previous = std::numeric_limits<double>::infinity();
        for (int refine = 0; refine < 4; ++refine) {
            double worst = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                rhs[i] = active[i] ? 0.0 : p.b[i] - au[i];
                worst = std::max(worst, std::abs(rhs[i]));
            }
            // Stop once below the band, or once rounding in Au stalls progress.
            if (worst <= 0.1 * band || worst > 0.5 * previous) {
                break;
            }
            previous = worst;
            ws.solve_masked(p.A, active, rhs, correction);
            for (std::size_t i = 0; i < n; ++i) {
                if (!active[i]) {
                    u[i] += correction[i];
                }
            }
            p.A.apply(u, au);
        }
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            lambda[i] = au[i] - p.b[i];
            const char next = active[i] ? lambda[i] >= -band : u[i] < p.psi[i] - band;
            changed = changed || next != active[i];
            active[i] = next;
        }
        r = kkt_residuals(p, u, au);
        if (!changed) {
            if (!r.within(opt.tol)) {
                throw ConvergenceError("PDAS reached a fixed active set but residuals exceed tolerance "
                                       "(linear solve not accurate enough)",
                                       r, it, std::move(u));
            }
            return {std::move(u), std::vector<bool>(active.begin(), active.end()), it, r, 1};
        }
    }
    throw ConvergenceError("PDAS did not converge in " + std::to_string(max_iter) + " iterations", r, max_iter,
                           std::move(u));
}

inline ObstacleSolution solve_pdas(const ObstacleProblem& p, const SolverOptions& opt = {},
                                   std::optional<std::span<const double>> start = std::nullopt) {
    PdasWorkspace ws;
    return solve_pdas(p, opt, ws, start);
}

inline ObstacleSolution solve(const ObstacleProblem& p, Method method, const SolverOptions& opt, PdasWorkspace& ws,
                              std::optional<std::span<const double>> start = std::nullopt) {
    return method == Method::Psor ? solve_psor(p, opt, start) : solve_pdas(p, opt, ws, start);
}

inline constexpr std::size_t kMaxEnumerationSize = 15;

/**
 * Brute-force ground truth: tries all 2^n active sets, solves each reduced
 * SPD system densely, and keeps the candidates passing the KKT test at
 * tol·scale. All passing candidates must coincide (uniqueness of the
 * minimiser); their count is returned in `passing_active_sets`.
 */
inline ObstacleSolution enumerate_oracle(const ObstacleProblem& p, double tol = 1e-10) {
    const std::size_t n = p.size();
    if (n > kMaxEnumerationSize) {
        throw DimensionError("enumeration oracle refuses problems with more than " +
                             std::to_string(kMaxEnumerationSize) + " unknowns (got " + std::to_string(n) + ")");
    }
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ni, ni);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p.A.at(i, j);
        }
    }
    const Eigen::Map<const Eigen::VectorXd> b(p.b.data(), ni);
    const Eigen::Map<const Eigen::VectorXd> psi(p.psi.data(), ni);
    const double band = tol * p.scale();

    std::optional<ObstacleSolution> best;
    std::size_t passing = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<Eigen::Index> free;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(mask & (1u << i))) {
                free.push_back(static_cast<Eigen::Index>(i));
            }
        }
        Eigen::VectorXd u = psi;
        if (!free.empty()) {
            const auto nf = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd reduced(nf, nf);
            Eigen::VectorXd rhs = b(free);
            for (Eigen::Index a = 0; a < nf; ++a) {
                for (Eigen::Index c = 0; c < nf; ++c) {
                    reduced(a, c) = A(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(c)]);
                }
                for (std::size_t j = 0; j < n; ++j) {
                    if (mask & (1u << j)) {
                        rhs(a) -= A(free[static_cast<std::size_t>(a)], static_cast<Eigen::Index>(j)) * psi(static_cast<Eigen::Index>(j));
                    }
                }
            }
            const Eigen::LLT<Eigen::MatrixXd> llt(reduced);
            if (llt.info() != Eigen::Success) {
                throw Error("enumeration oracle: reduced matrix is not positive definite");
            }
            const Eigen::VectorXd reduced_u = llt.solve(rhs);
            u(free) = reduced_u;
        }
        const Eigen::VectorXd lambda = A * u - b;
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            ok = (mask & (1u << i)) ? lambda(k) >= -band : u(k) >= psi(k) - band;
        }
        if (!ok) {
            continue;
        }
        ++passing;
        Field uf(u.data(), u.data() + u.size());
        if (!best) {
            std::vector<bool> active(n);
            for (std::size_t i = 0; i < n; ++i) {
                active[i] = (mask & (1u << i)) != 0;
            }
            best = ObstacleSolution{uf, std::move(active), 1, kkt_residuals(p, uf), 0};
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (std::abs(uf[i] - best->u[i]) > 1e-8 * std::max(1.0, max_abs(best->u))) {
                    throw Error("enumeration oracle: two KKT points disagree; operator is not positive definite");
                }
            }
        }
    }
    if (!best) {
        throw Error("enumeration oracle: no active set passed the KKT test");
    }
    best->passing_active_sets = passing;
    return *best;
}

/// KKT residuals plus |⟨Au − b, u − ψ⟩_h|, each checked against tol·scale.
inline Report verify_conditions(const ObstacleProblem& p, std::span<const double> u, double tol = 1e-10) {
    const KKTResiduals r = kkt_residuals(p, u);
    const Field au = p.A.apply(u);
    double pairing = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        pairing += (au[i] - p.b[i]) * (u[i] - p.psi[i]);
    }
    pairing = std::abs(pairing) * p.cell_volume;

    const double threshold = tol * r.scale;
    Report rep;
    rep.name = "obstacle_kkt";
    rep.add("feasibility", r.feasibility, threshold);
    rep.add("dual", r.dual, threshold);
    rep.add("complementarity", r.complementarity, threshold);
    rep.add("k2_upper", r.k2_upper, threshold);
    rep.add("pairing", pairing, threshold);
    return rep;
}

/// Elliptic comparison: b₁ ≤ b₂ and ψ₁ ≤ ψ₂ with a shared A give u₁ ≤ u₂.
inline Report check_comparison(const ObstacleProblem& p1, const ObstacleProblem& p2, std::span<const double> u1,
                               std::span<const double> u2, double tol = 1e-10) {
    if (!(p1.A == p2.A)) {
        throw PreconditionError("comparison requires the same operator", 0);
    }
    if (u1.size() != p1.size() || u2.size() != p2.size()) {
        throw DimensionError("comparison: solution sizes do not match the problems");
    }
    for (std::size_t i = 0; i < p1.size(); ++i) {
        if (p1.b[i] > p2.b[i]) {
            throw PreconditionError("comparison hypothesis b1 <= b2 fails at index " + std::to_string(i), i);
        }
        if (p1.psi[i] > p2.psi[i]) {
            throw PreconditionError("comparison hypothesis psi1 <= psi2 fails at index " + std::to_string(i), i);
        }
    }
    double violation = 0.0;
    for (std::size_t i = 0; i < u1.size(); ++i) {
        violation = std::max(violation, u1[i] - u2[i]);
    }
    Report rep;
    rep.name = "obstacle_comparison";
    rep.add("max_violation", violation, tol);
    return rep;
}

/// Any w with w ≥ ψ and Aw ≥ b dominates the solution u.
inline Report check_minorant(const ObstacleProblem& p, std::span<const double> u, std::span<const double> w,
                             double tol = 1e-10) {
    if (u.size() != p.size() || w.size() != p.size()) {
        throw DimensionError("minorant check: sizes do not match the problem");
    }
    const double band = tol * p.scale();
    const Field aw = p.A.apply(w);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] < p.psi[i] - band) {
            throw PreconditionError("minorant check: w >= psi fails at index " + std::to_string(i), i);
        }
        if (aw[i] - p.b[i] < -band) {
            throw PreconditionError("minorant check: Aw >= b fails at index " + std::to_string(i), i);
        }
    }
    double violation = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        violation = std::max(violation, u[i] - w[i]);
    }
    Report rep;
    rep.name = "obstacle_minorant";
    rep.add("max_violation", violation, tol);
    return rep;
}

} // namespace unidiff
