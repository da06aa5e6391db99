#include "unidiff/stepper.hpp"

#include "generators.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace unidiff {
namespace {

using testing::max_diff;

Grid neumann_square(std::size_t n) {
    return build_grid(2, {1.0, 1.0}, {n, n}, BoundarySpec::all(BoundaryKind::Neumann));
}

Grid dirichlet_line(std::size_t n) { return build_grid(1, {1.0}, {n}, BoundarySpec::all(BoundaryKind::Dirichlet)); }

Field constant_field(const Grid& g, double c) { return Field(g.free_count(), c); }

TEST(TimePartition, UniformKnots) {
    const auto p = TimePartition::uniform(2.0, 4);
    EXPECT_EQ(p.steps(), 4u);
    EXPECT_EQ(p.knot(0), 0.0);
    EXPECT_EQ(p.knot(4), 2.0);
    EXPECT_DOUBLE_EQ(p.tau(2), 0.5);
    EXPECT_DOUBLE_EQ(p.mesh(), 0.5);
}

TEST(TimePartition, RejectsBadKnots) {
    EXPECT_THROW(TimePartition::from_knots({0.0, 0.5, 0.5, 1.0}), ConfigError);
    EXPECT_THROW(TimePartition::from_knots({0.1, 1.0}), ConfigError);
    EXPECT_THROW(TimePartition::from_knots({0.0}), ConfigError);
    EXPECT_THROW(TimePartition::uniform(1.0, 0), ConfigError);
    EXPECT_THROW(TimePartition::uniform(-1.0, 3), ConfigError);
    const auto p = TimePartition::from_knots({0.0, 0.1, 0.5, 1.0});
    EXPECT_DOUBLE_EQ(p.mesh(), 0.5);
}

TEST(AverageForcing, ConstantInTime) {
    const Grid g = dirichlet_line(6);
    const Field f = average_forcing(Forcing::from_expression(parse_expression("x*x")), 0.0, 0.3, g);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double x = g.free_coordinates(k)[0];
        EXPECT_EQ(f[k], x * x);
    }
}

TEST(AverageForcing, LinearInTimeIsExact) {
    const Grid g = dirichlet_line(5);
    for (double v : average_forcing(Forcing::from_expression(parse_expression("t")), 0.0, 1.0, g)) {
        EXPECT_NEAR(v, 0.5, 1e-15);
    }
}

TEST(AverageForcing, CubicInTimeIsExact) {
    const Grid g = dirichlet_line(4);
    // (1/2) ∫_1^3 t^3 dt = (81 - 1) / 8 = 10.
    for (double v : average_forcing(Forcing::from_expression(parse_expression("t^3")), 1.0, 3.0, g, 4)) {
        EXPECT_NEAR(v, 10.0, 1e-13);
    }
}

TEST(AverageForcing, ExponentialWithinSimpsonError) {
    const Grid g = dirichlet_line(4);
    for (double v : average_forcing(Forcing::from_expression(parse_expression("exp(-t)")), 0.0, 1.0, g)) {
        EXPECT_NEAR(v, 0.6321205588285577, 1e-6);
    }
}

TEST(AverageForcing, RejectsBadArguments) {
    const Grid g = dirichlet_line(4);
    const auto f = Forcing::from_expression(parse_expression("t"));
    EXPECT_THROW(average_forcing(f, 1.0, 1.0, g), ConfigError);
    EXPECT_THROW(average_forcing(f, 0.0, 1.0, g, 3), ConfigError);
    EXPECT_THROW(average_forcing(f, 0.0, 1.0, g, 2), ConfigError);
    EXPECT_THROW(average_forcing(Forcing::from_expression(parse_expression("1/(t-0.5)")), 0.0, 1.0, g),
                 ExprEvalError);
}

TEST(Step, NeumannConstantGrowsByTau) {
    const Grid g = neumann_square(9);
    const auto r = step(constant_field(g, 1.0), constant_field(g, 1.0), 0.1, g);
    for (double v : r.u) {
        EXPECT_NEAR(v, 1.1, 1e-14);
    }
    EXPECT_TRUE(r.certificate.passed(1e-10));
}

TEST(Step, FullyClampedWhenRightSideNonPositive) {
    const Grid g = dirichlet_line(11);
    const Field u_prev = sample(g, [](double x, double) { return x * (1.0 - x); });
    // -Δ u_prev = 2 on the interior, so f = -1 gives Δu + f = -3 < 0.
    const auto r = step(u_prev, constant_field(g, -1.0), 0.05, g);
    EXPECT_EQ(max_diff(r.u, u_prev), 0.0);
    EXPECT_TRUE(r.certificate.passed(1e-10));
}

TEST(Step, MatchesUnconstrainedImplicitEulerWhenNonBinding) {
    const Grid g = dirichlet_line(21);
    const double tau = 0.01;
    const Field f = sample(g, [](double x, double) { return 1.0 + x; });
    const auto r = step(constant_field(g, 0.0), f, tau, g);

    const SparseOperator L = assemble_laplacian(g);
    const auto n = static_cast<Eigen::Index>(g.free_count());
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            M(i, j) = L.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) + (i == j ? 1.0 / tau : 0.0);
        }
    }
    const Eigen::VectorXd heat = M.llt().solve(Eigen::Map<const Eigen::VectorXd>(f.data(), n));
    ASSERT_GE(heat.minCoeff(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        EXPECT_NEAR(r.u[static_cast<std::size_t>(i)], heat(i), 1e-12);
    }
}

TEST(Step, CertificateOnRandomDataPassesForBothMethods) {
    std::mt19937 rng(7);
    const Grid g = build_grid(2, {1.0, 2.0}, {7, 9}, BoundarySpec{{BoundaryKind::Dirichlet, BoundaryKind::Neumann,
                                                                   BoundaryKind::Neumann, BoundaryKind::Dirichlet}});
    for (Method m : {Method::Pdas, Method::Psor}) {
        StepOptions opt;
        opt.method = m;
        Stepper s(g, opt);
        for (int trial = 0; trial < 10; ++trial) {
            const Field u = testing::random_field(g.free_count(), rng, -1.0, 1.0);
            const Field f = testing::random_field(g.free_count(), rng, -20.0, 20.0);
            const auto r = s.step(u, f, 0.02);
            EXPECT_TRUE(r.certificate.passed(1e-10)) << to_string(m) << " worst " << r.certificate.worst();
            for (std::size_t i = 0; i < u.size(); ++i) {
                EXPECT_GE(r.u[i], u[i]);
            }
        }
    }
}

TEST(Step, NonConvergenceCarriesCertificate) {
    const Grid g = dirichlet_line(41);
    StepOptions opt;
    opt.method = Method::Psor;
    opt.solver.max_iter = 2;
    Stepper s(g, opt);
    try {
        s.step(constant_field(g, 0.0), constant_field(g, 1.0), 10.0);
        FAIL();
    } catch (const StepFailure& e) {
        EXPECT_EQ(e.iterate().size(), g.free_count());
        EXPECT_GT(e.certificate().worst(), 0.0);
    }
}

TEST(Step, RejectsBadTau) {
    const Grid g = dirichlet_line(5);
    EXPECT_THROW(step(constant_field(g, 0.0), constant_field(g, 0.0), 0.0, g), ConfigError);
    EXPECT_THROW(step(constant_field(g, 0.0), Field(2, 0.0), 0.1, g), DimensionError);
}

RunSetup one_plus_t_setup(std::size_t n, std::size_t m, double T) {
    RunSetup s;
    s.grid = neumann_square(n);
    s.u0 = constant_field(s.grid, 1.0);
    s.forcing = Forcing::constant(1.0);
    s.partition = TimePartition::uniform(T, m);
    return s;
}

TEST(Run, OnePlusT) {
    const Trajectory tr = run(one_plus_t_setup(8, 10, 1.0));
    ASSERT_EQ(tr.states.size(), 11u);
    ASSERT_EQ(tr.certificates.size(), 10u);
    for (std::size_t k = 0; k <= 10; ++k) {
        for (double v : tr.states[k]) {
            EXPECT_NEAR(v, 1.0 + tr.partition.knot(k), 1e-12);
        }
    }
    for (double t : {0.0, 0.05, 0.33, 0.7, 1.0}) {
        for (double v : interpolate(tr, t, Interpolation::Linear)) {
            EXPECT_NEAR(v, 1.0 + t, 1e-12);
        }
    }
}

TEST(Run, DiscreteHarmonicDataIsStationary) {
    // Constants are the discrete-harmonic fields of an all-Neumann grid.
    RunSetup s;
    s.grid = neumann_square(6);
    s.u0 = constant_field(s.grid, 2.5);
    s.forcing = Forcing::constant(0.0);
    s.partition = TimePartition::uniform(1.0, 5);
    const Trajectory tr = run(s);
    for (const auto& u : tr.states) {
        EXPECT_LE(max_diff(u, s.u0), 1e-12);
    }
}

TEST(Run, ConcaveBumpStaysClamped) {
    RunSetup s;
    s.grid = dirichlet_line(51);
    s.u0 = sample(s.grid, [](double x, double) { return std::sin(std::numbers::pi * x); });
    const SparseOperator L = assemble_laplacian(s.grid);
    for (double v : neg_laplacian(s.grid, L, s.u0)) {
        ASSERT_GE(v, 0.0);
    }
    s.forcing = Forcing::constant(0.0);
    s.partition = TimePartition::uniform(1.0, 8);
    const Trajectory tr = run(s);
    for (const auto& u : tr.states) {
        EXPECT_EQ(max_diff(u, s.u0), 0.0);
    }
}

TEST(Run, NonUniformKnotsAndMonotonicity) {
    std::mt19937 rng(3);
    RunSetup s;
    s.grid = build_grid(1, {2.0}, {33}, BoundarySpec{{BoundaryKind::Dirichlet, BoundaryKind::Neumann,
                                                      BoundaryKind::Neumann, BoundaryKind::Neumann}});
    s.u0 = testing::random_field(s.grid.free_count(), rng, -1.0, 1.0);
    s.forcing = Forcing::from_expression(parse_expression("sin(3*x - 2*t) + 0.5"));
    s.partition = TimePartition::from_knots({0.0, 0.01, 0.05, 0.2, 0.25, 0.6, 1.0});
    const Trajectory tr = run(s);
    for (std::size_t k = 1; k < tr.states.size(); ++k) {
        EXPECT_TRUE(tr.certificates[k - 1].passed(1e-10));
        for (std::size_t i = 0; i < s.u0.size(); ++i) {
            EXPECT_GE(tr.states[k][i] - tr.states[k - 1][i], -1e-10);
        }
    }
}

TEST(Run, FailureReturnsPartialTrajectory) {
    RunSetup s = one_plus_t_setup(5, 4, 1.0);
    s.forcing = Forcing(
        [](double, double, double t) {
            if (t > 0.5) throw ExprEvalError("boom");
            return 1.0;
        },
        false);
    EXPECT_THROW(run(s), ExprEvalError);

    s = one_plus_t_setup(9, 4, 1.0);
    s.options.method = Method::Psor;
    s.options.solver.max_iter = 1;
    s.u0 = sample(s.grid, [](double x, double y) { return x * y; });
    try {
        run(s);
        FAIL();
    } catch (const RunFailure& e) {
        EXPECT_EQ(e.failed_step(), e.partial().states.size());
        EXPECT_EQ(e.partial().certificates.size() + 1, e.partial().states.size());
    }
}

TEST(Interpolate, KnotsMidpointsAndRange) {
    RunSetup s;
    s.grid = dirichlet_line(9);
    s.u0 = constant_field(s.grid, 0.0);
    s.forcing = Forcing::from_expression(parse_expression("1 + x"));
    s.partition = TimePartition::from_knots({0.0, 0.2, 0.3, 1.0});
    const Trajectory tr = run(s);
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        const double t = tr.partition.knot(k);
        EXPECT_EQ(interpolate(tr, t, Interpolation::Linear), tr.states[k]);
        EXPECT_EQ(interpolate(tr, t, Interpolation::Constant), tr.states[k]);
    }
    const Field mid = interpolate(tr, 0.25, Interpolation::Linear);
    for (std::size_t i = 0; i < mid.size(); ++i) {
        EXPECT_NEAR(mid[i], 0.5 * (tr.states[1][i] + tr.states[2][i]), 1e-15);
    }
    EXPECT_EQ(interpolate(tr, 0.21, Interpolation::Constant), tr.states[2]);
    EXPECT_EQ(interpolate(tr, 0.1, Interpolation::Constant), tr.states[1]);
    EXPECT_THROW(interpolate(tr, -0.1, Interpolation::Linear), ConfigError);
    EXPECT_THROW(interpolate(tr, 1.5, Interpolation::Constant), ConfigError);
}

TEST(NegativeVariant, NegatesData) {
    const Grid g = neumann_square(4);
    const auto [v0, gf] = transform_negative_variant(constant_field(g, 1.0), Forcing::constant(1.0));
    for (double v : v0) EXPECT_EQ(v, -1.0);
    for (double v : gf.at(g, 0.3)) EXPECT_EQ(v, -1.0);

    const Field u0 = sample(g, [](double x, double y) { return x - 2.0 * y; });
    const auto f = Forcing::from_expression(parse_expression("x*t"));
    const auto once = transform_negative_variant(u0, f);
    const auto twice = transform_negative_variant(once.first, once.second);
    EXPECT_EQ(twice.first, u0);
    EXPECT_EQ(twice.second.at(g, 0.7), f.at(g, 0.7));
}

TEST(NegativeVariant, MinusOneMinusT) {
    RunSetup s = one_plus_t_setup(6, 10, 1.0);
    const auto [v0, g] = transform_negative_variant(constant_field(s.grid, -1.0), Forcing::constant(-1.0));
    s.u0 = v0;
    s.forcing = g;
    const Trajectory tr = run(s);
    const auto u = negated_states(tr);
    for (std::size_t k = 0; k < u.size(); ++k) {
        for (double v : u[k]) {
            EXPECT_NEAR(v, -1.0 - tr.partition.knot(k), 1e-12);
        }
    }
}

TEST(Forcing, NodalValues) {
    const Grid g = dirichlet_line(5);
    const Forcing f = Forcing::from_field({1.0, 2.0, 3.0});
    EXPECT_TRUE(f.time_independent());
    EXPECT_EQ(f.at(g, 0.0), (Field{1.0, 2.0, 3.0}));
    EXPECT_EQ(f.negated().at(g, 9.0), (Field{-1.0, -2.0, -3.0}));
    EXPECT_THROW(Forcing::from_field({1.0}).at(g, 0.0), DimensionError);
}

} // namespace
} // namespace unidiff
