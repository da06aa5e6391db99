#pragma once

#include "unidiff/errors.hpp"
#include "unidiff/expr.hpp"
#include "unidiff/mesh.hpp"
#include "unidiff/obstacle.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace unidiff {

/// 0 = t_0 < t_1 < ... < t_m = T.
class TimePartition {
public:
    TimePartition() = default;

    static TimePartition uniform(double final_time, std::size_t steps) {
        if (!(final_time > 0.0) || !std::isfinite(final_time)) {
            throw ConfigError("partition: final time must be positive and finite");
        }
        if (steps == 0) {
            throw ConfigError("partition: need at least one step");
        }
        std::vector<double> knots(steps + 1);
        for (std::size_t k = 0; k <= steps; ++k) {
            knots[k] = final_time * static_cast<double>(k) / static_cast<double>(steps);
        }
        knots.back() = final_time;
        TimePartition p = from_knots(std::move(knots));
        // Every step reports the same τ, so per-τ operator caches stay valid.
        p.uniform_tau_ = final_time / static_cast<double>(steps);
        return p;
    }

    static TimePartition from_knots(std::vector<double> knots) {
        if (knots.size() < 2) {
            throw ConfigError("partition: need at least two knots");
        }
        if (knots.front() != 0.0) {
            throw ConfigError("partition: first knot must be 0");
        }
        for (std::size_t k = 1; k < knots.size(); ++k) {
            if (!(knots[k] > knots[k - 1]) || !std::isfinite(knots[k])) {
                throw ConfigError("partition: knots must be finite and strictly increasing (index " +
                                  std::to_string(k) + ")");
            }
        }
        TimePartition p;
        p.knots_ = std::move(knots);
        return p;
    }

    std::size_t steps() const noexcept { return knots_.size() - 1; }
    double knot(std::size_t k) const { return knots_.at(k); }
    /// τ_k = t_k − t_{k−1}, k = 1..m.
    double tau(std::size_t k) const {
        const double d = knots_.at(k) - knots_.at(k - 1);
        return uniform_tau_ > 0.0 ? uniform_tau_ : d;
    }
    bool is_uniform() const noexcept { return uniform_tau_ > 0.0; }
    double final_time() const { return knots_.back(); }
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// |τ| = max_k τ_k.
    double mesh() const {
        double m = 0.0;
        for (std::size_t k = 1; k < knots_.size(); ++k) {
            m = std::max(m, tau(k));
        }
        return m;
    }

    friend bool operator==(const TimePartition&, const TimePartition&) = default;

private:
    std::vector<double> knots_{0.0, 1.0};
    double uniform_tau_ = 0.0;
};

/// Space-time data f(x, y, t), either a callable or fixed nodal values.
class Forcing {
public:
    using Fn = std::function<double(double, double, double)>;

    Forcing() : Forcing(constant(0.0)) {}
    Forcing(Fn fn, bool time_independent) : fn_(std::move(fn)), time_independent_(time_independent) {}

    static Forcing constant(double c) {
        return Forcing([c](double, double, double) { return c; }, true);
    }

    static Forcing from_expression(const Expression& e) {
        return Forcing([e](double x, double y, double t) { return e.evaluate(x, y, t); }, !e.depends_on_time());
    }

    /// Time-independent nodal values over the free unknowns.
    static Forcing from_field(Field values) {
        Forcing f;
        f.fn_ = nullptr;
        f.nodal_ = std::move(values);
        f.time_independent_ = true;
        return f;
    }

    bool time_independent() const noexcept { return time_independent_; }

    Field at(const Grid& grid, double t) const {
        if (!fn_) {
            grid.check_field(nodal_);
            Field out = nodal_;
            if (negated_) {
                for (double& v : out) v = -v;
            }
            return out;
        }
        return sample(grid, [&](double x, double y) { return negated_ ? -fn_(x, y, t) : fn_(x, y, t); });
    }

    /// g = −f, for the negative-part equation.
    Forcing negated() const {
        Forcing g = *this;
        g.negated_ = !negated_;
        return g;
    }

private:
    Fn fn_;
    Field nodal_;
    bool time_independent_ = true;
    bool negated_ = false;
};

/**
 * f_k = (1/τ_k) ∫ f(·, s) ds over [t_{k−1}, t_k] by composite Simpson with
 * `intervals` (even, >= 4) subintervals, exact for cubics in t.
 */
inline Field average_forcing(const Forcing& f, double t_prev, double t_next, const Grid& grid, int intervals = 16) {
    if (!(t_next > t_prev)) {
        throw ConfigError("average_forcing: empty time interval");
    }
    if (intervals < 4 || intervals % 2 != 0) {
        throw ConfigError("average_forcing: Simpson needs an even number (>= 4) of subintervals");
    }
    if (f.time_independent()) {
        return f.at(grid, t_prev);
    }
    const double h = (t_next - t_prev) / intervals;
    Field acc(grid.free_count(), 0.0);
    for (int s = 0; s <= intervals; ++s) {
        const double w = (s == 0 || s == intervals) ? 1.0 : (s % 2 == 1 ? 4.0 : 2.0);
        const double t = s == intervals ? t_next : t_prev + s * h;
        const Field v = f.at(grid, t);
        for (std::size_t k = 0; k < acc.size(); ++k) {
            acc[k] += w * v[k];
        }
    }
    for (double& v : acc) {
        v /= 3.0 * intervals;
    }
    return acc;
}

struct StepOptions {
    Method method = Method::Pdas;
    SolverOptions solver;
    int simpson_intervals = 16;
};

/**
 * Residuals of one backward-Euler step, with δ = (u_k − u_{k−1})/τ and
 * g = δ − Δ_h u_k − f_k.
 */
struct StepCertificate {
    double monotonicity_violation = 0.0; ///< max(u_{k−1} − u_k)₊
    double g_nonneg_violation = 0.0;     ///< max(−g)₊
    double orthogonality = 0.0;          ///< |(g, u_k − u_{k−1})_h|
    double positive_part_residual = 0.0; ///< ‖δ − (Δ_h u_k + f_k)₊‖∞
    double k2_violation = 0.0;           ///< max(g − (−Δ_h u_{k−1} − f_k)₊)₊
    /// max(1, ‖f_k + u_{k−1}/τ‖∞).
    double scale = 1.0;

    double worst() const {
        return std::max({monotonicity_violation, g_nonneg_violation, orthogonality, positive_part_residual,
                         k2_violation});
    }
    bool passed(double tol) const { return worst() <= tol * scale; }
};

/// Certificate from precomputed −Δ_h u_{k−1} and −Δ_h u_k.
inline StepCertificate certify_step(const Grid& grid, std::span<const double> u_prev, std::span<const double> u,
                                    std::span<const double> f, double tau, std::span<const double> lap_prev,
                                    std::span<const double> lap_u) {
    grid.check_field(u_prev);
    grid.check_field(u);
    grid.check_field(f);
    const auto w = grid.weights();
    StepCertificate c;
    double pairing = 0.0;
    double data = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double du = u[i] - u_prev[i];
        const double delta = du / tau;
        const double g = delta + lap_u[i] - f[i];
        c.monotonicity_violation = std::max(c.monotonicity_violation, -du);
        c.g_nonneg_violation = std::max(c.g_nonneg_violation, -g);
        c.positive_part_residual = std::max(c.positive_part_residual, std::abs(delta - std::max(f[i] - lap_u[i], 0.0)));
        c.k2_violation = std::max(c.k2_violation, g - std::max(lap_prev[i] - f[i], 0.0));
        pairing += w[i] * g * du;
        data = std::max(data, std::abs(f[i] + u_prev[i] / tau));
    }
    c.orthogonality = std::abs(grid.cell_volume() * pairing);
    c.scale = std::max(1.0, data);
    return c;
}

inline StepCertificate certify_step(const Grid& grid, const SparseOperator& laplacian, std::span<const double> u_prev,
                                    std::span<const double> u, std::span<const double> f, double tau) {
    return certify_step(grid, u_prev, u, f, tau, neg_laplacian(grid, laplacian, u_prev),
                        neg_laplacian(grid, laplacian, u));
}

class StepFailure : public Error {
public:
    StepFailure(const std::string& what, StepCertificate certificate, Field iterate)
        : Error(what), certificate_(certificate), iterate_(std::move(iterate)) {}

    const StepCertificate& certificate() const noexcept { return certificate_; }
    const Field& iterate() const noexcept { return iterate_; }

private:
    StepCertificate certificate_;
    Field iterate_;
};

struct StepResult {
    Field u;
    StepCertificate certificate;
    int iterations = 0;
};

/**
 * Backward Euler for ∂ₜu = (Δu + f)₊. Each step minimises
 *
 *     ½σ(v, v)_h + φ_h(v) − (f_k + σ u_{k−1}, v)_h,   σ = 1/τ_k,
 *
 * over v ≥ u_{k−1}: the obstacle problem with A = σW + L, b = W(f_k + σu_{k−1})
 * and ψ = u_{k−1}. The solver is warm-started from u_{k−1}; the PDAS
 * factorization is kept across steps.
 */
class Stepper {
public:
    Stepper(Grid grid, StepOptions options)
        : grid_(std::move(grid)), options_(options), laplacian_(assemble_laplacian(grid_)) {}

    const Grid& grid() const noexcept { return grid_; }
    const SparseOperator& laplacian() const noexcept { return laplacian_; }
    const StepOptions& options() const noexcept { return options_; }

    /// The step's obstacle problem. Takes the cached operator; `step` returns it.
    ObstacleProblem problem(std::span<const double> u_prev, std::span<const double> f, double tau) {
        if (!(tau > 0.0) || !std::isfinite(tau)) {
            throw ConfigError("step: tau must be positive and finite");
        }
        grid_.check_field(u_prev);
        grid_.check_field(f);
        const double sigma = 1.0 / tau;
        if (tau != cached_tau_ || shifted_.nonzeros() == 0) {
            shifted_ = shift_operator(laplacian_, sigma, grid_.weights());
            cached_tau_ = tau;
        }
        Field b(u_prev.size());
        const auto w = grid_.weights();
        for (std::size_t i = 0; i < b.size(); ++i) {
            b[i] = w[i] * (f[i] + sigma * u_prev[i]);
        }
        return make_obstacle_problem(std::move(shifted_), std::move(b), Field(u_prev.begin(), u_prev.end()),
                                     grid_.cell_volume());
    }

    StepResult step(std::span<const double> u_prev, std::span<const double> f, double tau) {
        ObstacleProblem p = problem(u_prev, f, tau);
        // Hand the cached operator back once the solve is done.
        struct Restore {
            SparseOperator& slot;
            ObstacleProblem& p;
            ~Restore() { slot = std::move(p.A); }
        } restore{shifted_, p};
        try {
            ObstacleSolution s = solve(p, options_.method, options_.solver, workspace_, u_prev);
            // Consecutive steps share u_{k−1}, so its Laplacian is carried over.
            if (!std::equal(u_prev.begin(), u_prev.end(), last_u_.begin(), last_u_.end())) {
                last_lap_ = neg_laplacian(grid_, laplacian_, u_prev);
            }
            Field lap_u = neg_laplacian(grid_, laplacian_, s.u);
            StepCertificate c = certify_step(grid_, u_prev, s.u, f, tau, last_lap_, lap_u);
            last_u_ = s.u;
            last_lap_ = std::move(lap_u);
            return {std::move(s.u), c, s.iterations};
        } catch (const ConvergenceError& e) {
            throw StepFailure(e.what(), certify_step(grid_, laplacian_, u_prev, e.iterate(), f, tau), e.iterate());
        }
    }

private:
    Grid grid_;
    StepOptions options_;
    SparseOperator laplacian_;
    SparseOperator shifted_;
    double cached_tau_ = std::numeric_limits<double>::quiet_NaN();
    PdasWorkspace workspace_;
    Field last_u_;
    Field last_lap_;
};

/// One step from scratch; prefer a persistent `Stepper` inside loops.
inline StepResult step(std::span<const double> u_prev, std::span<const double> f, double tau, const Grid& grid,
                       const StepOptions& options = {}) {
    Stepper s(grid, options);
    return s.step(u_prev, f, tau);
}

enum class Interpolation { Linear, Constant };

struct Trajectory {
    Grid grid;
    TimePartition partition;
    /// u_0 .. u_m.
    std::vector<Field> states;
    /// f_1 .. f_m; forcing_means[k − 1] belongs to step k.
    std::vector<Field> forcing_means;
    /// certificates[k − 1] belongs to step k.
    std::vector<StepCertificate> certificates;
    StepOptions options;

    std::size_t steps() const noexcept { return certificates.size(); }

    /// δ_k = (u_k − u_{k−1}) / τ_k.
    Field delta(std::size_t k) const {
        const double tau = partition.tau(k);
        Field d(states[k].size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = (states[k][i] - states[k - 1][i]) / tau;
        }
        return d;
    }
};

struct RunSetup {
    Grid grid;
    Field u0;
    Forcing forcing;
    TimePartition partition;
    StepOptions options;
};

class RunFailure : public Error {
public:
    RunFailure(const std::string& what, Trajectory partial, std::size_t failed_step, StepCertificate certificate)
        : Error(what), partial_(std::move(partial)), failed_step_(failed_step), certificate_(certificate) {}

    const Trajectory& partial() const noexcept { return partial_; }
    std::size_t failed_step() const noexcept { return failed_step_; }
    const StepCertificate& certificate() const noexcept { return certificate_; }

private:
    Trajectory partial_;
    std::size_t failed_step_;
    StepCertificate certificate_;
};

inline Trajectory run(const RunSetup& setup) {
    setup.grid.check_field(setup.u0);
    for (double v : setup.u0) {
        if (!std::isfinite(v)) {
            throw ConfigError("initial data must be finite");
        }
    }
    Trajectory traj;
    traj.grid = setup.grid;
    traj.partition = setup.partition;
    traj.options = setup.options;
    traj.states.push_back(setup.u0);

    Stepper stepper(setup.grid, setup.options);
    const std::size_t m = setup.partition.steps();
    // Time-independent forcing has the same mean on every step.
    const std::optional<Field> fixed =
        setup.forcing.time_independent() ? std::optional<Field>(setup.forcing.at(setup.grid, 0.0)) : std::nullopt;
    for (std::size_t k = 1; k <= m; ++k) {
        Field fk = fixed ? *fixed
                         : average_forcing(setup.forcing, setup.partition.knot(k - 1), setup.partition.knot(k),
                                           setup.grid, setup.options.simpson_intervals);
        try {
            StepResult r = stepper.step(traj.states.back(), fk, setup.partition.tau(k));
            traj.states.push_back(std::move(r.u));
            traj.forcing_means.push_back(std::move(fk));
            traj.certificates.push_back(r.certificate);
        } catch (const StepFailure& e) {
            throw RunFailure("step " + std::to_string(k) + " failed: " + e.what(), std::move(traj), k,
                             e.certificate());
        }
    }
    return traj;
}

/**
 * Piecewise-linear interpolant, or the right-continuous piecewise-constant one
 * taking u_k on (t_{k−1}, t_k].
 */
inline Field interpolate(const Trajectory& traj, double t, Interpolation rule) {
    const auto& knots = traj.partition.knots();
    if (!(t >= 0.0 && t <= knots.back())) {
        throw ConfigError("interpolate: t outside [0, T]");
    }
    if (traj.states.size() != knots.size()) {
        throw DimensionError("interpolate: trajectory is incomplete");
    }
    if (t == 0.0) {
        return traj.states.front();
    }
    const auto k = static_cast<std::size_t>(std::lower_bound(knots.begin(), knots.end(), t) - knots.begin());
    if (rule == Interpolation::Constant || t == knots[k]) {
        return traj.states[k];
    }
    const double theta = (t - knots[k - 1]) / (knots[k] - knots[k - 1]);
    Field out(traj.states[k].size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = traj.states[k - 1][i] + theta * (traj.states[k][i] - traj.states[k - 1][i]);
    }
    return out;
}

/**
 * v = −u, g = −f turns ∂ₜu = (Δu + f)₋ into ∂ₜv = (Δv + g)₊. Negating the
 * states of the transformed run solves the negative-part equation.
 */
inline std::pair<Field, Forcing> transform_negative_variant(const Field& u0, const Forcing& f) {
    Field v0 = u0;
    for (double& v : v0) {
        v = -v;
    }
    return {std::move(v0), f.negated()};
}

inline std::vector<Field> negated_states(const Trajectory& traj) {
    std::vector<Field> out = traj.states;
    for (auto& s : out) {
        for (double& v : s) {
            v = -v;
        }
    }
    return out;
}

} // namespace unidiff
