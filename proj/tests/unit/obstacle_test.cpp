#include "unidiff/mesh.hpp"
#include "unidiff/obstacle.hpp"

#include "generators.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <random>

namespace unidiff {
namespace {

using testing::max_diff;
using testing::random_field;
using testing::random_m_matrix;
using testing::random_problem;

ObstacleProblem scalar_problem(double b) {
    return make_obstacle_problem(SparseOperator::from_triplets(1, {{0, 0, 1.0}}), {b}, {0.0});
}

ObstacleProblem tridiagonal_problem() {
    SparseOperator A = SparseOperator::from_triplets(
        3, {{0, 0, 2}, {0, 1, -1}, {1, 0, -1}, {1, 1, 2}, {1, 2, -1}, {2, 1, -1}, {2, 2, 2}});
    return make_obstacle_problem(std::move(A), {-1.0, 1.0, -1.0}, {0.0, 0.0, 0.0});
}

Field dense_solve(const SparseOperator& A, const Field& b) {
    const auto n = static_cast<Eigen::Index>(A.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = A.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    const Eigen::VectorXd x = m.llt().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
    return Field(x.data(), x.data() + n);
}

TEST(Psor, FullyClampedScalar) {
    const auto p = scalar_problem(-1.0);
    const auto s = solve_psor(p);
    EXPECT_EQ(s.u[0], 0.0);
    EXPECT_TRUE(s.active[0]);
    EXPECT_EQ(s.kkt.dual, 0.0);
}

TEST(Psor, UnconstrainedScalar) {
    const auto s = solve_psor(scalar_problem(2.0));
    EXPECT_NEAR(s.u[0], 2.0, 1e-12);
    EXPECT_FALSE(s.active[0]);
}

TEST(Psor, TridiagonalMatchesEnumeratedActiveSet) {
    // Frozen from an independent enumeration of all 8 active sets: {0, 2} active.
    const auto s = solve_psor(tridiagonal_problem());
    EXPECT_NEAR(s.u[0], 0.0, 1e-12);
    EXPECT_NEAR(s.u[1], 0.5, 1e-10);
    EXPECT_NEAR(s.u[2], 0.0, 1e-12);
    EXPECT_EQ(s.active, (std::vector<bool>{true, false, true}));
}

TEST(Psor, RejectsBadParameters) {
    SolverOptions opt;
    opt.omega = 2.0;
    EXPECT_THROW(solve_psor(scalar_problem(1.0), opt), ConfigError);
    opt.omega = 1.5;
    opt.tol = 0.0;
    EXPECT_THROW(solve_psor(scalar_problem(1.0), opt), ConfigError);
}

TEST(Psor, NonConvergenceCarriesResiduals) {
    const Grid g = build_grid(1, {1.0}, {60}, BoundarySpec::all(BoundaryKind::Dirichlet));
    const auto p = make_obstacle_problem(assemble_laplacian(g), Field(g.free_count(), 1.0), Field(g.free_count(), 0.0));
    SolverOptions opt;
    opt.max_iter = 3;
    try {
        solve_psor(p, opt);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.iterations(), 3);
        EXPECT_GT(e.residuals().worst(), 0.0);
        EXPECT_EQ(e.iterate().size(), g.free_count());
    }
}

TEST(Pdas, ScalarAndTridiagonalExamples) {
    EXPECT_EQ(solve_pdas(scalar_problem(-1.0)).u[0], 0.0);
    EXPECT_DOUBLE_EQ(solve_pdas(scalar_problem(2.0)).u[0], 2.0);
    const auto s = solve_pdas(tridiagonal_problem());
    EXPECT_NEAR(max_diff(s.u, {0.0, 0.5, 0.0}), 0.0, 1e-14);
    EXPECT_EQ(s.active, (std::vector<bool>{true, false, true}));
}

TEST(Pdas, SlackObstacleGivesUnconstrainedSolution) {
    std::mt19937 rng(11);
    SparseOperator A = random_m_matrix(10, rng);
    const Field b = random_field(10, rng, -1.0, 1.0);
    const Field x = dense_solve(A, b);
    const auto p = make_obstacle_problem(A, b, Field(10, -100.0));
    const auto s = solve_pdas(p);
    EXPECT_EQ(s.active_count(), 0u);
    EXPECT_LE(max_diff(s.u, x), 1e-12);
}

TEST(Pdas, RightHandSideEqualToObstacleImageReturnsObstacle) {
    std::mt19937 rng(12);
    SparseOperator A = random_m_matrix(8, rng);
    const Field psi = random_field(8, rng, -1.0, 1.0);
    const Field fhat = A.apply(psi);
    const auto s = solve_pdas(make_obstacle_problem(A, fhat, psi));
    EXPECT_LE(max_diff(s.u, psi), 1e-12);
}

TEST(Pdas, TerminalActiveSetIsFixedPoint) {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = random_problem(12, rng);
        SolverOptions opt;
        const auto s = solve_pdas(p, opt);
        const double band = opt.tol * p.scale();
        const Field au = p.A.apply(s.u);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double lambda = au[i] - p.b[i];
            const bool next = s.active[i] ? lambda >= -band : s.u[i] < p.psi[i] - band;
            EXPECT_EQ(next, s.active[i]);
        }
    }
}

TEST(Pdas, WorkspaceReusesFactorizationForUnchangedActiveSet) {
    const Grid g = build_grid(2, {1.0, 1.0}, {12, 12}, BoundarySpec::all(BoundaryKind::Dirichlet));
    const SparseOperator A = assemble_A_sigma(g, 10.0);
    PdasWorkspace ws;
    const auto p = make_obstacle_problem(A, Field(g.free_count(), 5.0), Field(g.free_count(), 0.0));
    solve_pdas(p, {}, ws);
    const std::size_t after_first = ws.factorizations();
    solve_pdas(p, {}, ws);
    EXPECT_EQ(ws.factorizations(), after_first);
}

TEST(EnumerateOracle, ClosedFormScalars) {
    EXPECT_EQ(enumerate_oracle(scalar_problem(-1.0)).u[0], 0.0);
    EXPECT_EQ(enumerate_oracle(scalar_problem(2.0)).u[0], 2.0);
}

TEST(EnumerateOracle, RefusesLargeProblems) {
    std::mt19937 rng(1);
    EXPECT_THROW(enumerate_oracle(random_problem(16, rng)), DimensionError);
}

TEST(EnumerateOracle, UniquePassingActiveSetOnRandomInstances) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const auto s = enumerate_oracle(random_problem(5, rng));
        EXPECT_EQ(s.passing_active_sets, 1u);
    }
}

TEST(EnumerateOracle, AgreesWithPsorOnTridiagonal) {
    const auto p = tridiagonal_problem();
    EXPECT_LE(max_diff(enumerate_oracle(p).u, solve_psor(p).u), 1e-10);
}

TEST(Solvers, AgreeWithOracleOnRandomInstances) {
    std::mt19937 rng(21);
    const SolverOptions opt;
    for (int trial = 0; trial < 60; ++trial) {
        const auto p = random_problem(2 + trial % 11, rng);
        const auto oracle = enumerate_oracle(p);
        const auto psor = solve_psor(p, opt);
        const auto pdas = solve_pdas(p, opt);
        EXPECT_LE(max_diff(psor.u, pdas.u), 2 * opt.tol);
        EXPECT_LE(max_diff(oracle.u, pdas.u), 1e-10);
    }
}

TEST(Solvers, ComplementarityAndK2SandwichHold) {
    std::mt19937 rng(22);
    const double tol = 1e-10;
    for (int trial = 0; trial < 40; ++trial) {
        const auto p = random_problem(9, rng);
        for (const auto& s : {solve_psor(p), solve_pdas(p)}) {
            const Field au = p.A.apply(s.u);
            const double band = tol * p.scale();
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double m = std::min(au[i] - p.b[i], s.u[i] - p.psi[i]);
                EXPECT_LE(std::abs(m), band);
                EXPECT_GE(au[i], p.b[i] - band);
                EXPECT_LE(au[i], std::max(p.b[i], p.fhat[i]) + band);
                if (s.active[i]) {
                    EXPECT_LE(std::abs(s.u[i] - p.psi[i]), band);
                }
            }
        }
    }
}

TEST(Solvers, MinimiserBeatsRandomFeasiblePoints) {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> step(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_problem(10, rng);
        const auto s = solve_pdas(p);
        const double ju = objective(p, s.u);
        for (int k = 0; k < 50; ++k) {
            Field v = p.psi;
            for (auto& x : v) x += 2.0 * step(rng);
            EXPECT_LE(ju, objective(p, v) + 1e-10 * std::max(1.0, max_abs(v)));
        }
    }
}

TEST(VerifyConditions, OracleSolutionPasses) {
    std::mt19937 rng(31);
    const auto p = random_problem(8, rng);
    const Report rep = verify_conditions(p, enumerate_oracle(p).u);
    EXPECT_TRUE(rep.passed());
    for (const auto& e : rep.entries) {
        EXPECT_LE(e.value, 1e-10 * p.scale()) << e.name;
    }
}

TEST(VerifyConditions, ObstacleSolvesItsOwnImage) {
    std::mt19937 rng(32);
    SparseOperator A = random_m_matrix(6, rng);
    const Field psi = random_field(6, rng, -1.0, 1.0);
    const Field fhat = A.apply(psi);
    const Report rep = verify_conditions(make_obstacle_problem(A, fhat, psi), psi);
    for (const auto& e : rep.entries) {
        EXPECT_EQ(e.value, 0.0) << e.name;
    }
}

TEST(VerifyConditions, InfeasibleUnconstrainedSolutionFails) {
    const auto p = tridiagonal_problem();
    const Field x = dense_solve(p.A, p.b);
    ASSERT_LT(*std::min_element(x.begin(), x.end()), 0.0);
    const Report rep = verify_conditions(p, x);
    EXPECT_GT(rep.value("feasibility"), 0.0);
    EXPECT_FALSE(rep.passed());
}

TEST(CheckComparison, IdenticalDataHasNoViolation) {
    std::mt19937 rng(41);
    const auto p = random_problem(7, rng);
    const auto u = solve_pdas(p).u;
    EXPECT_EQ(check_comparison(p, p, u, u).value("max_violation"), 0.0);
}

TEST(CheckComparison, OrderedRandomPairsOnGrid) {
    const Grid g = build_grid(1, {1.0}, {40}, BoundarySpec::all(BoundaryKind::Dirichlet));
    const SparseOperator A = assemble_A_sigma(g, 2.0);
    std::mt19937 rng(42);
    const SolverOptions opt;
    for (int trial = 0; trial < 30; ++trial) {
        const Field b1 = random_field(g.free_count(), rng, -3.0, 3.0);
        const Field psi1 = random_field(g.free_count(), rng, -0.5, 0.5);
        Field b2 = b1, psi2 = psi1;
        const Field db = random_field(g.free_count(), rng, 0.0, 1.0);
        const Field dpsi = random_field(g.free_count(), rng, 0.0, 0.2);
        for (std::size_t i = 0; i < b2.size(); ++i) {
            b2[i] += db[i];
            psi2[i] += dpsi[i];
        }
        const auto p1 = make_obstacle_problem(A, b1, psi1);
        const auto p2 = make_obstacle_problem(A, b2, psi2);
        const Report rep = check_comparison(p1, p2, solve_psor(p1, opt).u, solve_psor(p2, opt).u, 2 * opt.tol);
        EXPECT_TRUE(rep.passed()) << rep.value("max_violation");
    }
}

TEST(CheckComparison, ConstantLiftShiftsSolution) {
    std::mt19937 rng(43);
    const auto p1 = random_problem(8, rng);
    Field psi2 = p1.psi, b2 = p1.b;
    const Field a1 = p1.A.apply(Field(8, 1.0));
    for (std::size_t i = 0; i < 8; ++i) {
        psi2[i] += 1.0;
        b2[i] += a1[i];
    }
    const auto p2 = make_obstacle_problem(p1.A, b2, psi2);
    const Field u1 = enumerate_oracle(p1).u;
    const Field u2 = enumerate_oracle(p2).u;
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_NEAR(u2[i], u1[i] + 1.0, 1e-12);
    }
    EXPECT_TRUE(check_comparison(p1, p2, u1, u2).passed());
}

TEST(CheckComparison, ViolatedHypothesisNamesIndex) {
    std::mt19937 rng(44);
    const auto p1 = random_problem(5, rng);
    Field b2 = p1.b;
    b2[3] -= 1.0;
    const auto p2 = make_obstacle_problem(p1.A, b2, p1.psi);
    try {
        check_comparison(p1, p2, p1.psi, p1.psi);
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_EQ(e.index(), 3u);
    }
}

TEST(CheckMinorant, SolutionDominatesItself) {
    const auto p = tridiagonal_problem();
    const auto u = solve_pdas(p).u;
    EXPECT_EQ(check_minorant(p, u, u).value("max_violation"), 0.0);
}

TEST(CheckMinorant, ConstructedSupersolutionDominates) {
    std::mt19937 rng(51);
    int used = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const auto p = random_problem(8, rng);
        Field top(8);
        for (std::size_t i = 0; i < 8; ++i) top[i] = std::max(p.b[i], p.fhat[i]);
        const Field w = dense_solve(p.A, top);
        bool above = true;
        for (std::size_t i = 0; i < 8; ++i) above = above && w[i] >= p.psi[i];
        if (!above) continue;
        ++used;
        EXPECT_TRUE(check_minorant(p, solve_pdas(p).u, w).passed());
    }
    EXPECT_GT(used, 0);
}

TEST(CheckMinorant, RandomSupersolutionsDominate) {
    std::mt19937 rng(52);
    for (int trial = 0; trial < 40; ++trial) {
        const auto p = random_problem(10, rng);
        const Field u = solve_pdas(p).u;
        // A⁻¹e ≥ 0 for e ≥ 0 (inverse-positivity of M-matrices).
        const Field d = dense_solve(p.A, random_field(10, rng, 0.0, 1.0));
        Field w = u;
        for (std::size_t i = 0; i < 10; ++i) w[i] += d[i];
        EXPECT_TRUE(check_minorant(p, u, w).passed());
    }
}

TEST(CheckMinorant, RejectsNonSupersolution) {
    const auto p = tridiagonal_problem();
    EXPECT_THROW(check_minorant(p, p.psi, Field{-1.0, 0.0, 0.0}), PreconditionError);
    EXPECT_THROW(check_minorant(p, p.psi, Field{0.0, 0.0, 0.0}), PreconditionError);
}

} // namespace
} // namespace unidiff
