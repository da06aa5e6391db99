#pragma once

#include "unidiff/errors.hpp"
#include "unidiff/mesh.hpp"
#include "unidiff/obstacle.hpp"
#include "unidiff/report.hpp"
#include "unidiff/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace unidiff {

namespace detail {

// Quadrature of a forcing that saturates at its cap can land an ulp or two above it.
inline bool below(double a, double cap) { return a <= cap + 1e-12 * std::max(1.0, std::abs(cap)); }

inline Field difference(std::span<const double> a, std::span<const double> b) {
    Field d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    return d;
}

inline double norm_sq(const Grid& g, std::span<const double> v) { return g.inner(v, v); }

inline void require_complete(const Trajectory& t) {
    const std::size_t m = t.partition.steps();
    if (t.states.size() != m + 1 || t.forcing_means.size() != m || t.certificates.size() != m) {
        throw DimensionError("trajectory is incomplete: " + std::to_string(t.states.size()) + " states for " +
                             std::to_string(m) + " steps");
    }
}

inline void require_compatible(const Trajectory& a, const Trajectory& b) {
    require_complete(a);
    require_complete(b);
    if (!(a.grid == b.grid)) {
        throw DimensionError("trajectories live on different grids");
    }
    if (!(a.partition.knots() == b.partition.knots())) {
        throw DimensionError("trajectories use different time partitions");
    }
}

} // namespace detail

/**
 * Per-step residuals of the complementarity form at the knots:
 *
 *     δ_k ≥ 0,   g_k = δ_k − Δ_h u_k − f_k ≥ 0,   g_k δ_k = 0   (componentwise).
 *
 * Residuals are absolute ∞-norms. The remaining conditions (u in the grid
 * space, the boundary treatment, the initial value) hold by construction and
 * are recorded as notes.
 */
inline Report complementarity_report(const Trajectory& traj, double tol = 1e-8) {
    detail::require_complete(traj);
    const SparseOperator L = assemble_laplacian(traj.grid);
    Report rep;
    rep.name = "complementarity";
    std::vector<double> v_delta, v_g, v_product;
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        const Field delta = traj.delta(k);
        const Field lap = neg_laplacian(traj.grid, L, traj.states[k]);
        const Field& f = traj.forcing_means[k - 1];
        double rd = 0.0, rg = 0.0, rp = 0.0;
        for (std::size_t i = 0; i < delta.size(); ++i) {
            const double g = delta[i] + lap[i] - f[i];
            rd = std::max(rd, -delta[i]);
            rg = std::max(rg, -g);
            rp = std::max(rp, std::abs(g * delta[i]));
        }
        v_delta.push_back(rd);
        v_g.push_back(rg);
        v_product.push_back(rp);
    }
    auto add = [&](const char* name, std::vector<double> series) {
        const double worst = series.empty() ? 0.0 : *std::max_element(series.begin(), series.end());
        rep.add(name, worst, tol).series = std::move(series);
    };
    add("time_derivative_negative_part", std::move(v_delta));
    add("g_negative_part", std::move(v_g));
    add("complementarity_product", std::move(v_product));
    rep.notes.push_back("states are grid fields with Dirichlet values eliminated and mirror-ghost Neumann rows");
    rep.notes.push_back("u_0 is the stored initial state");
    return rep;
}

/**
 * For every ℓ:
 *
 *     Σ_{k≤ℓ} τ_k‖δ_k‖² + φ_h(u_ℓ) ≤ φ_h(u_0) + ½ Σ_{k≤ℓ} τ_k(‖f_k‖² + ‖δ_k‖²).
 *
 * The entry value is max_ℓ (left − right); the series holds every ℓ.
 */
inline Report dissipation_report(const Trajectory& traj, double tol = 1e-8) {
    detail::require_complete(traj);
    const Grid& g = traj.grid;
    const SparseOperator L = assemble_laplacian(g);
    const double phi0 = dirichlet_energy(g, L, traj.states.front());
    double dissipation = 0.0;
    double data = 0.0;
    std::vector<double> excess;
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        const double tau = traj.partition.tau(k);
        const double d2 = detail::norm_sq(g, traj.delta(k));
        dissipation += tau * d2;
        data += 0.5 * tau * (detail::norm_sq(g, traj.forcing_means[k - 1]) + d2);
        excess.push_back(dissipation + dirichlet_energy(g, L, traj.states[k]) - (phi0 + data));
    }
    Report rep;
    rep.name = "dissipation";
    const double worst = excess.empty() ? 0.0 : *std::max_element(excess.begin(), excess.end());
    rep.add("max_excess", worst, tol).series = std::move(excess);
    return rep;
}

/**
 * −Δ_h u_k ≤ f* ∨ (−Δ_h u_0) componentwise for all k, provided f_k ≤ f*.
 * When some f_k exceeds f* the bound is still evaluated but reported as
 * informational with status "hypotheses unchecked".
 */
inline Report laplacian_bound_report(const Trajectory& traj, std::span<const double> f_star, double tol = 1e-8) {
    detail::require_complete(traj);
    traj.grid.check_field(f_star);
    const SparseOperator L = assemble_laplacian(traj.grid);
    const Field cap0 = neg_laplacian(traj.grid, L, traj.states.front());

    bool hypothesis = true;
    for (const Field& fk : traj.forcing_means) {
        for (std::size_t i = 0; i < fk.size(); ++i) {
            hypothesis = hypothesis && detail::below(fk[i], f_star[i]);
        }
    }
    std::vector<double> excess;
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        const Field lap = neg_laplacian(traj.grid, L, traj.states[k]);
        double e = 0.0;
        for (std::size_t i = 0; i < lap.size(); ++i) {
            e = std::max(e, lap[i] - std::max(f_star[i], cap0[i]));
        }
        excess.push_back(e);
    }
    Report rep;
    rep.name = "laplacian_bound";
    const double worst = excess.empty() ? 0.0 : *std::max_element(excess.begin(), excess.end());
    rep.add("max_excess", worst, tol, hypothesis).series = std::move(excess);
    if (!hypothesis) {
        rep.status = "hypotheses unchecked";
        rep.notes.push_back("some step mean f_k exceeds f*; the bound is reported but not asserted");
    }
    return rep;
}

/// Energy bookkeeping at the knots; index k refers to u_k (step terms are 0 at k = 0).
struct EnergyRecord {
    std::vector<double> dirichlet_energy; ///< φ_h(u_k)
    std::vector<double> lyapunov;         ///< E_h(u_k) = φ_h(u_k) − (f_∞, u_k)_h
    std::vector<double> dissipation;      ///< τ_k‖δ_k‖²_h
    std::vector<double> forcing_gap;      ///< τ_k‖f_k − f_∞‖²_h
};

/**
 * Per-step energy inequality
 *
 *     E_h(u_k) − E_h(u_{k−1}) + (τ_k/2)‖δ_k‖² ≤ (τ_k/2)‖f_k − f_∞‖²,
 *
 * and monotonicity of k ↦ E_h(u_k) − ½ Σ_{j≤k} τ_j‖f_j − f_∞‖².
 */
inline std::pair<EnergyRecord, Report> energy_report(const Trajectory& traj, std::span<const double> f_inf,
                                                     double tol = 1e-8) {
    detail::require_complete(traj);
    const Grid& g = traj.grid;
    g.check_field(f_inf);
    const SparseOperator L = assemble_laplacian(g);

    EnergyRecord rec;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const double phi = dirichlet_energy(g, L, traj.states[k]);
        rec.dirichlet_energy.push_back(phi);
        rec.lyapunov.push_back(phi - g.inner(f_inf, traj.states[k]));
        if (k == 0) {
            rec.dissipation.push_back(0.0);
            rec.forcing_gap.push_back(0.0);
            continue;
        }
        const double tau = traj.partition.tau(k);
        rec.dissipation.push_back(tau * detail::norm_sq(g, traj.delta(k)));
        rec.forcing_gap.push_back(tau * detail::norm_sq(g, detail::difference(traj.forcing_means[k - 1], f_inf)));
    }

    std::vector<double> step_excess;
    std::vector<double> lyapunov_increase;
    double shifted_prev = rec.lyapunov[0];
    double gap_sum = 0.0;
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        step_excess.push_back(rec.lyapunov[k] - rec.lyapunov[k - 1] + 0.5 * rec.dissipation[k] -
                              0.5 * rec.forcing_gap[k]);
        gap_sum += 0.5 * rec.forcing_gap[k];
        const double shifted = rec.lyapunov[k] - gap_sum;
        lyapunov_increase.push_back(shifted - shifted_prev);
        shifted_prev = shifted;
    }
    Report rep;
    rep.name = "energy";
    auto worst = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
    rep.add("max_step_excess", worst(step_excess), tol).series = std::move(step_excess);
    rep.add("max_lyapunov_increase", worst(lyapunov_increase), tol).series = std::move(lyapunov_increase);
    return {std::move(rec), std::move(rep)};
}

/**
 * Σ τ_k‖δ¹_k − δ²_k‖² + max_ℓ 2φ_h(u¹_ℓ − u²_ℓ) ≤ 2(2φ_h(u¹_0 − u²_0) + Σ τ_k‖f¹_k − f²_k‖²).
 * The entry value is left − right.
 */
inline Report continuous_dependence_report(const Trajectory& a, const Trajectory& b, double tol = 1e-8) {
    detail::require_compatible(a, b);
    const Grid& g = a.grid;
    const SparseOperator L = assemble_laplacian(g);
    double dissipation = 0.0;
    double forcing = 0.0;
    double sup_gap = 0.0;
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        sup_gap = std::max(sup_gap, 2.0 * dirichlet_energy(g, L, detail::difference(a.states[k], b.states[k])));
        if (k == 0) {
            continue;
        }
        const double tau = a.partition.tau(k);
        dissipation += tau * detail::norm_sq(g, detail::difference(a.delta(k), b.delta(k)));
        forcing += tau * detail::norm_sq(g, detail::difference(a.forcing_means[k - 1], b.forcing_means[k - 1]));
    }
    const double initial = 2.0 * dirichlet_energy(g, L, detail::difference(a.states[0], b.states[0]));
    const double lhs = dissipation + sup_gap;
    const double rhs = 2.0 * (initial + forcing);
    Report rep;
    rep.name = "continuous_dependence";
    rep.add("excess", lhs - rhs, tol);
    rep.add("lhs", lhs, 0.0, false);
    rep.add("rhs", rhs, 0.0, false);
    return rep;
}

/**
 * max over nodes and knots of (u¹ − u²)₊ for ordered data u¹_0 ≤ u²_0,
 * f¹_k ≤ f²_k. Unordered data raise PreconditionError naming the first
 * offending component (states index for u_0, then k·n + i for forcing).
 */
inline Report comparison_report(const Trajectory& a, const Trajectory& b, double tol = 1e-9) {
    detail::require_compatible(a, b);
    const std::size_t n = a.grid.free_count();
    for (std::size_t i = 0; i < n; ++i) {
        if (a.states[0][i] > b.states[0][i]) {
            throw PreconditionError("comparison hypothesis u0_1 <= u0_2 fails at unknown " + std::to_string(i), i);
        }
    }
    for (std::size_t k = 0; k < a.forcing_means.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            if (a.forcing_means[k][i] > b.forcing_means[k][i]) {
                throw PreconditionError("comparison hypothesis f_1 <= f_2 fails at step " + std::to_string(k + 1) +
                                            ", unknown " + std::to_string(i),
                                        k * n + i);
            }
        }
    }
    std::vector<double> per_knot;
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v = std::max(v, a.states[k][i] - b.states[k][i]);
        }
        per_knot.push_back(v);
    }
    Report rep;
    rep.name = "comparison";
    rep.add("max_violation", *std::max_element(per_knot.begin(), per_knot.end()), tol).series = std::move(per_knot);
    return rep;
}

/// Solution of the stationary obstacle problem with obstacle u_0 and data f_∞.
struct SteadyState {
    Field z;
    KKTResiduals kkt;
    Field u0;
    Field f_inf;
};

/**
 * min φ_h(v) − (f_∞, v)_h over v ≥ u_0, i.e. the obstacle problem with A = L,
 * b = W f_∞, ψ = u_0. Needs a Dirichlet node for coercivity.
 */
inline SteadyState solve_steady_state(const Grid& grid, const Field& u0, const Field& f_inf,
                                      const SolverOptions& opt = {}) {
    grid.check_field(u0);
    grid.check_field(f_inf);
    if (!grid.has_dirichlet()) {
        throw CoercivityError("steady state needs at least one Dirichlet node");
    }
    Field b(f_inf.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        b[i] = grid.weight(i) * f_inf[i];
    }
    const ObstacleProblem p = make_obstacle_problem(assemble_laplacian(grid), std::move(b), u0, grid.cell_volume());
    ObstacleSolution s = solve_pdas(p, opt, std::span<const double>(u0));
    return {std::move(s.u), s.kkt, u0, f_inf};
}

/**
 * Long-time behaviour against the steady state z.
 *
 * gap(t) = φ_h(u(t) − z)^{1/2} is sampled at dyadic checkpoints T/2^j (the
 * first knot at or after each), in increasing time. Entries:
 *   final_gap          gap at T, gating, threshold `tol_asymptotic`
 *   gap_increase       largest rise between consecutive checkpoints, informational
 *   domination         max_k (u_k − z)₊, gating, threshold `tol_domination`
 * If some f_k exceeds f_∞ the hypotheses fail: status becomes
 * "hypotheses unchecked" and every entry is informational.
 */
inline Report asymptotic_report(const Trajectory& traj, const SteadyState& steady, double tol_asymptotic = 1e-4,
                                double tol_domination = 1e-9) {
    detail::require_complete(traj);
    const Grid& g = traj.grid;
    g.check_field(steady.z);
    g.check_field(steady.f_inf);
    const SparseOperator L = assemble_laplacian(g);

    bool hypothesis = true;
    double forcing_gap = 0.0;
    for (std::size_t k = 0; k < traj.forcing_means.size(); ++k) {
        const Field& fk = traj.forcing_means[k];
        for (std::size_t i = 0; i < fk.size(); ++i) {
            hypothesis = hypothesis && detail::below(fk[i], steady.f_inf[i]);
        }
        forcing_gap += traj.partition.tau(k + 1) * detail::norm_sq(g, detail::difference(fk, steady.f_inf));
    }
    if (!(traj.states.front() == steady.u0)) {
        hypothesis = false;
    }

    auto gap = [&](std::size_t k) {
        return std::sqrt(std::max(0.0, dirichlet_energy(g, L, detail::difference(traj.states[k], steady.z))));
    };

    const auto& knots = traj.partition.knots();
    const double T = traj.partition.final_time();
    std::vector<std::size_t> checkpoints;
    for (double t = T;; t *= 0.5) {
        const auto k = static_cast<std::size_t>(std::lower_bound(knots.begin(), knots.end(), t) - knots.begin());
        if (k == 0 || (!checkpoints.empty() && checkpoints.back() == k)) {
            break;
        }
        checkpoints.push_back(k);
    }
    std::reverse(checkpoints.begin(), checkpoints.end());

    std::vector<double> gaps;
    for (std::size_t k : checkpoints) {
        gaps.push_back(gap(k));
    }
    double rise = 0.0;
    for (std::size_t j = 1; j < gaps.size(); ++j) {
        rise = std::max(rise, gaps[j] - gaps[j - 1]);
    }
    double domination = 0.0;
    for (const Field& u : traj.states) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            domination = std::max(domination, u[i] - steady.z[i]);
        }
    }

    Report rep;
    rep.name = "asymptotic";
    rep.add("final_gap", gap(traj.states.size() - 1), tol_asymptotic, hypothesis);
    auto& e = rep.add("gap_increase", rise, tol_domination, false);
    e.series = gaps;
    rep.add("domination", domination, tol_domination, hypothesis);
    rep.add("forcing_gap_integral", forcing_gap, 0.0, false).pass = std::isfinite(forcing_gap);
    for (std::size_t j = 0; j < checkpoints.size(); ++j) {
        rep.notes.push_back("checkpoint t=" + std::to_string(knots[checkpoints[j]]) + " gap=" + std::to_string(gaps[j]));
    }
    if (!hypothesis) {
        rep.status = "hypotheses unchecked";
        rep.notes.push_back("forcing exceeds f_inf somewhere, or u_0 differs from the steady-state obstacle");
    }
    return rep;
}

/// Two runs from the same data on different partitions end at the same state.
inline Report limit_uniqueness_report(const Trajectory& a, const Trajectory& b, double tol_asymptotic = 1e-4) {
    if (!(a.grid == b.grid)) {
        throw DimensionError("trajectories live on different grids");
    }
    const SparseOperator L = assemble_laplacian(a.grid);
    const double d =
        std::sqrt(std::max(0.0, dirichlet_energy(a.grid, L, detail::difference(a.states.back(), b.states.back()))));
    Report rep;
    rep.name = "limit_uniqueness";
    rep.add("final_state_gap", d, 10.0 * tol_asymptotic);
    return rep;
}

/**
 * ‖u^{(m)}(T) − u^{(2m)}(T)‖_h over runs with successively doubled uniform
 * partitions of the same interval. The differences must decrease strictly.
 */
inline Report refinement_report(const std::vector<Trajectory>& runs) {
    if (runs.size() < 3) {
        throw ConfigError("refinement needs at least three runs");
    }
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (!(runs[r].grid == runs[0].grid) || runs[r].partition.final_time() != runs[0].partition.final_time() ||
            runs[r].partition.steps() != 2 * runs[r - 1].partition.steps()) {
            throw ConfigError("refinement runs must share grid and T and double m each time");
        }
    }
    std::vector<double> diffs;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        diffs.push_back(runs[0].grid.norm(detail::difference(runs[r - 1].states.back(), runs[r].states.back())));
    }
    double rise = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < diffs.size(); ++j) {
        rise = std::max(rise, diffs[j] - diffs[j - 1]);
    }
    Report rep;
    rep.name = "refinement";
    // Strict decrease: the largest consecutive change must be negative.
    auto& e = rep.add("max_consecutive_change", rise, 0.0);
    e.pass = rise < 0.0;
    e.series = std::move(diffs);
    return rep;
}

} // namespace unidiff
