#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "tikreg/errors.hpp"
#include "tikreg/solvers.hpp"

using namespace tikreg;
using tikreg::testing::flat;
using tikreg::testing::random_grid;
using tikreg::testing::rel_diff;

namespace {

GridFunction vec2(double a, double b) { return GridFunction(Shape{2, 1, 1}, std::vector<double>{a, b}); }

// Blur + alpha * grad2 solved with a QR factorization of the oracle matrices.
Eigen::VectorXd blur_grad_oracle(int w, int h, double kappa, int radius, double alpha, const GridFunction& y) {
    const auto t = tikreg::testing::blur_matrix_oracle(w, h, kappa, radius);
    const auto l = tikreg::testing::gradient_matrix_oracle(w, h);
    const Eigen::MatrixXd m = t.transpose() * t + alpha * l.transpose() * l;
    return m.colPivHouseholderQr().solve(t.transpose() * flat(y));
}

Problem blur_grad_problem(int w, int h, double alpha, std::mt19937_64& rng) {
    return Problem{make_gaussian_blur(w, h, 6.0, 3), random_grid(Shape{w, h, 1}, rng, 0.0, 1.0),
                   Penalizer::squared_norm(make_gradient(w, h)).scaled(alpha)};
}

}  // namespace

TEST(Objective, Examples) {
    const Shape s{2, 1, 1};
    const Problem zero{make_identity(s), GridFunction(s), Penalizer::squared_norm(make_identity(s)).scaled(3.0)};
    EXPECT_EQ(objective(zero, GridFunction(s)), 0.0);
    const Problem p{make_identity(s), vec2(1, 2), Penalizer::squared_norm(make_identity(s))};
    EXPECT_DOUBLE_EQ(objective(p, vec2(0.5, 1.0)), 2.5);
}

TEST(Objective, MatchesTwoTermRecomputation) {
    std::mt19937_64 rng(41);
    const auto p = blur_grad_problem(6, 5, 0.3, rng);
    const auto x = random_grid(Shape{6, 5, 1}, rng);
    const auto t = tikreg::testing::blur_matrix_oracle(6, 5, 6.0, 3);
    const auto l = tikreg::testing::gradient_matrix_oracle(6, 5);
    const double oracle = (t * flat(x) - flat(p.data)).squaredNorm() + 0.3 * (l * flat(x)).squaredNorm();
    EXPECT_LE(rel_diff(objective(p, x), oracle), 1e-12);
}

TEST(Problem, ValidateRejectsShapeMismatch) {
    const Problem p{make_identity(Shape{3, 3, 1}), GridFunction(Shape{3, 2, 1}),
                    Penalizer::squared_norm(make_identity(Shape{3, 3, 1}))};
    EXPECT_THROW(p.validate(), DimensionError);
    EXPECT_THROW(objective(p, GridFunction(Shape{3, 3, 1})), DimensionError);
    const Problem q{make_identity(Shape{3, 3, 1}), GridFunction(Shape{3, 3, 1}),
                    Penalizer::squared_norm(make_identity(Shape{2, 3, 1}))};
    EXPECT_THROW(solve_quadratic(q), DimensionError);
}

TEST(SolveQuadratic, ScalarClosedForms) {
    const Shape s{2, 1, 1};
    const auto id = make_identity(s);
    const Problem p{id, vec2(1, 2), Penalizer::squared_norm(id)};
    const auto r = solve_quadratic(p);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.minimizer[0], 0.5, 1e-14);
    EXPECT_NEAR(r.minimizer[1], 1.0, 1e-14);

    const Problem big{id, vec2(1, 2), Penalizer::squared_norm(id).scaled(999.0)};
    EXPECT_LE(rel_diff(norm_l2(solve_quadratic(big).minimizer), std::sqrt(5.0) / 1000.0), 1e-12);

    const auto dense = solve_dense_oracle(p);
    EXPECT_NEAR(dense[0], 0.5, 1e-14);
    EXPECT_NEAR(dense[1], 1.0, 1e-14);
}

TEST(SolveQuadratic, MatchesQrOracleOnBlurGrad) {
    std::mt19937_64 rng(42);
    for (double alpha : {1e-3, 0.1, 10.0}) {
        const auto p = blur_grad_problem(6, 6, alpha, rng);
        const auto r = solve_quadratic(p);
        const auto oracle = blur_grad_oracle(6, 6, 6.0, 3, alpha, p.data);
        EXPECT_TRUE(r.converged);
        EXPECT_LE((flat(r.minimizer) - oracle).norm(), 1e-8 * oracle.norm());
        EXPECT_LE((flat(solve_dense_oracle(p)) - oracle).norm(), 1e-10 * oracle.norm());
    }
}

TEST(SolveQuadratic, AgreesWithDenseOracleOnFiftyInstances) {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 2 + static_cast<int>(u(rng) * 5);
        const int h = 2 + static_cast<int>(u(rng) * 5);
        const Shape s{w, h, 1};
        const double kappa = 0.3 + 6 * u(rng);
        const StructuralField field{random_grid(s, rng), 1.0 + 5 * u(rng)};
        const auto w8 = make_weighted_sum({{0.05 + u(rng), make_identity(s), 2.0},
                                           {0.05 + u(rng), make_structural(field), 2.0},
                                           {u(rng) + 0.01, make_gradient(w, h), 2.0}});
        const Problem p{make_gaussian_blur(w, h, kappa, 2), random_grid(s, rng), w8.scaled(std::pow(10.0, -2 + 3 * u(rng)))};
        const auto cg = solve_quadratic(p);
        const auto dense = solve_dense_oracle(p);
        EXPECT_LE(norm_l2(cg.minimizer - dense), 1e-8 * std::max(norm_l2(dense), 1e-300));
    }
}

TEST(SolveQuadratic, OptimalityResidual) {
    std::mt19937_64 rng(44);
    const auto p = blur_grad_problem(12, 10, 0.05, rng);
    SolverOptions opts;
    opts.cg_tolerance = 1e-11;
    const auto r = solve_quadratic(p, opts);
    const NormalOperator normal(p.forward, p.penalizer.quadratic_terms());
    const auto rhs = p.forward.apply_adjoint(p.data);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.relative_residual, opts.cg_tolerance);
    // The reported residual is recursive; the true residual may differ by roundoff.
    EXPECT_LE(norm_l2(normal.apply(r.minimizer) - rhs), 2 * opts.cg_tolerance * norm_l2(rhs));
    EXPECT_NEAR(r.final_gradient_norm, 2.0 * norm_l2(normal.apply(r.minimizer) - rhs), 1e-12);
}

TEST(SolveQuadratic, ObjectiveTraceIsTheObjective) {
    std::mt19937_64 rng(45);
    const auto p = blur_grad_problem(8, 8, 0.2, rng);
    const auto r = solve_quadratic(p);
    ASSERT_GE(r.objective_trace.size(), 2u);
    EXPECT_NEAR(r.objective_trace.front(), objective(p, GridFunction(Shape{8, 8, 1})), 1e-12);
    EXPECT_NEAR(r.objective_trace.back(), objective(p, r.minimizer), 1e-10);
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
        EXPECT_LE(r.objective_trace[k], r.objective_trace[k - 1] + 1e-13);
    }
}

TEST(SolveQuadratic, WarmStartAtSolutionStopsImmediately) {
    std::mt19937_64 rng(46);
    const auto p = blur_grad_problem(6, 6, 0.1, rng);
    SolverOptions opts;
    opts.initial_guess = solve_dense_oracle(p);
    const auto r = solve_quadratic(p, opts);
    EXPECT_LE(r.iterations, 1);
    EXPECT_TRUE(r.converged);
}

TEST(SolveQuadratic, ErrorsAndNonconvergence) {
    const Shape s{4, 4, 1};
    const Problem tv{make_identity(s), GridFunction(s), Penalizer::total_variation(4, 4)};
    EXPECT_THROW(solve_quadratic(tv), ConfigurationError);
    EXPECT_THROW(solve_dense_oracle(tv), ConfigurationError);

    std::mt19937_64 rng(47);
    auto p = blur_grad_problem(16, 16, 1e-4, rng);
    SolverOptions opts;
    opts.max_iterations = 2;
    const auto r = solve_quadratic(p, opts);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 2);
    opts.cg_tolerance = 0.0;
    EXPECT_THROW(solve_quadratic(p, opts), ParameterError);
}

TEST(ConjugateGradient, NonpositiveCurvatureIsReported) {
    const Shape s{3, 1, 1};
    const auto zero = make_dense(Eigen::MatrixXd::Zero(3, 3), s, s);
    const NormalOperator normal(zero, {});
    try {
        conjugate_gradient(normal, GridFunction(s, 1.0));
        FAIL();
    } catch (const DefinitenessError& e) {
        EXPECT_EQ(e.rayleigh_quotient(), 0.0);
    }
}

TEST(SolveDenseOracle, SingularAndCap) {
    const Problem singular{make_gradient(3, 3), GridFunction(Shape{3, 3, 2}),
                           Penalizer::squared_norm(make_gradient(3, 3))};
    EXPECT_THROW(solve_dense_oracle(singular), DefinitenessError);
    const Shape big{65, 64, 1};
    const Problem large{make_identity(big), GridFunction(big), Penalizer::squared_norm(make_identity(big))};
    EXPECT_THROW(solve_dense_oracle(large), CapacityError);
}

TEST(SolveDenseOracle, UnregularizedLeastSquaresMatchesSvd) {
    std::mt19937_64 rng(48);
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(12, 6);
    const Shape in{3, 2, 1};
    const Shape out{4, 3, 1};
    const auto y = random_grid(out, rng);
    // Tiny identity weight so the solve still goes through the penalized path.
    const Problem p{make_dense(a, in, out), y, Penalizer::squared_norm(make_identity(in)).scaled(1e-300)};
    const Eigen::VectorXd svd = a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(flat(y));
    EXPECT_LE((flat(solve_dense_oracle(p)) - svd).norm(), 1e-10 * svd.norm());
}

TEST(SolveGeneral, AgreesWithQuadraticPath) {
    std::mt19937_64 rng(49);
    const auto p = blur_grad_problem(5, 5, 0.5, rng);
    const auto g = solve_general(p);
    const auto q = solve_quadratic(p);
    EXPECT_TRUE(g.converged);
    EXPECT_LE(g.final_gradient_norm, 1e-8);
    EXPECT_LE(norm_l2(g.minimizer - q.minimizer), 1e-6);
}

TEST(SolveGeneral, ZeroDataFromZeroStartTakesNoSteps) {
    const Shape s{6, 6, 1};
    for (const auto& w : {Penalizer::total_variation(6, 6), Penalizer::seminorm_power(make_gradient(6, 6), 1.5),
                          Penalizer::bv_norm(6, 6, 0.01)}) {
        const Problem p{make_gaussian_blur(6, 6, 6.0, 3), GridFunction(s), w};
        const auto r = solve_general(p);
        EXPECT_EQ(r.iterations, 0);
        EXPECT_TRUE(r.converged);
        EXPECT_EQ(norm_linf(r.minimizer), 0.0);
        EXPECT_EQ(r.objective_trace.size(), 1u);
    }
}

TEST(SolveGeneral, TvDeblurTraceDecreases) {
    const int n = 16;
    GridFunction truth(Shape{n, n, 1});
    for (int i = 4; i < 12; ++i)
        for (int j = 3; j < 10; ++j) truth.at(i, j) = 1.0;
    const auto blur = make_gaussian_blur(n, n, 1.0, 3);
    const Problem p{blur, blur.apply(truth), Penalizer::total_variation(n, n, 1e-2).scaled(0.01)};
    SolverOptions opts;
    opts.max_iterations = 3000;
    opts.gradient_tolerance = 1e-6;
    const auto r = solve_general(p, opts);
    ASSERT_GE(r.objective_trace.size(), 2u);
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
        EXPECT_LT(r.objective_trace[k], r.objective_trace[k - 1]);
    }
    EXPECT_LT(objective(p, r.minimizer), objective(p, GridFunction(Shape{n, n, 1})));
    EXPECT_NEAR(r.objective_trace.back(), objective(p, r.minimizer), 1e-9 * r.objective_trace.front());
    if (r.converged) EXPECT_LE(r.final_gradient_norm, opts.gradient_tolerance);
}

TEST(SolveGeneral, ConvergesForPowersAndTv) {
    std::mt19937_64 rng(50);
    const Shape s{8, 8, 1};
    const auto blur = make_gaussian_blur(8, 8, 6.0, 3);
    const auto y = random_grid(s, rng, 0.0, 1.0);
    for (const auto& w : {Penalizer::total_variation(8, 8, 1e-3).scaled(0.05),
                          Penalizer::bv_norm(8, 8, 1e-2).scaled(0.05),
                          Penalizer::seminorm_power(make_gradient(8, 8), 1.5).scaled(0.1),
                          Penalizer::seminorm_power(make_identity(s), 3.0)}) {
        const auto r = solve_general(Problem{blur, y, w});
        EXPECT_TRUE(r.converged) << to_string(w.kind()) << " |g| = " << r.final_gradient_norm;
        EXPECT_LE(r.final_gradient_norm, 1e-8);
    }
}

TEST(SolveGeneral, Errors) {
    const Shape s{4, 4, 1};
    const Problem p{make_identity(s), GridFunction(s, 1.0), Penalizer::total_variation(4, 4, 0.0)};
    EXPECT_THROW(solve_general(p), ConfigurationError);
    const Problem q{make_identity(s), GridFunction(s, 1.0), Penalizer::total_variation(4, 4)};
    SolverOptions opts;
    opts.initial_guess = GridFunction(Shape{3, 4, 1});
    EXPECT_THROW(solve_general(q, opts), DimensionError);
}

TEST(SolveGeneral, StagnationCarriesDiagnostics) {
    // With eps this small TV is a kink at zero: from a zero start no step
    // along -grad J gives sufficient decrease.
    std::mt19937_64 rng(51);
    const Shape s{6, 6, 1};
    const Problem p{make_identity(s), random_grid(s, rng, -1e-3, 1e-3), Penalizer::total_variation(6, 6, 1e-30)};
    try {
        solve_general(p);
        FAIL();
    } catch (const StagnationError& e) {
        EXPECT_EQ(e.iteration(), 0);
        EXPECT_GT(e.gradient_norm(), 0.0);
        EXPECT_NE(std::string(e.what()).find("60 halvings"), std::string::npos);
    }
}

TEST(Uniqueness, TenStartsAgree) {
    std::mt19937_64 rng(52);
    const Shape s{6, 6, 1};
    const auto blur = make_gaussian_blur(6, 6, 6.0, 3);
    const auto y = random_grid(s, rng, 0.0, 1.0);
    for (const auto& w : {Penalizer::squared_norm(make_gradient(6, 6)).scaled(0.3),
                          Penalizer::total_variation(6, 6, 1e-2).scaled(0.05),
                          Penalizer::seminorm_power(make_identity(s), 1.5).scaled(0.2)}) {
        const Problem p{blur, y, w};
        std::vector<GridFunction> minimizers;
        for (int start = 0; start < 10; ++start) {
            SolverOptions opts;
            opts.initial_guess = random_grid(s, rng, -5.0, 5.0);
            minimizers.push_back(solve_general(p, opts).minimizer);
        }
        for (std::size_t a = 0; a < minimizers.size(); ++a)
            for (std::size_t b = a + 1; b < minimizers.size(); ++b)
                EXPECT_LE(norm_l2(minimizers[a] - minimizers[b]), 1e-6) << to_string(w.kind());
    }
}

TEST(MonotoneAlpha, ResidualAndPenaltyOrdering) {
    std::mt19937_64 rng(53);
    const Shape s{8, 8, 1};
    const auto blur = make_gaussian_blur(8, 8, 0.8, 3);
    const auto y = random_grid(s, rng, 0.0, 1.0);
    const auto w0 = Penalizer::squared_norm(make_gradient(8, 8));
    double prev_res = -1.0;
    double prev_pen = 1e300;
    for (double alpha : {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
        const auto x = solve_quadratic(Problem{blur, y, w0.scaled(alpha)}).minimizer;
        const double res = norm_l2(blur.apply(x) - y);
        const double pen = w0.value(x);
        EXPECT_GE(res, prev_res * (1 - 1e-10));
        EXPECT_LE(pen, prev_pen * (1 + 1e-10));
        prev_res = res;
        prev_pen = pen;
    }
}

TEST(LimitToBestApproximate, IdentityClosedForm) {
    std::mt19937_64 rng(54);
    const Shape s{3, 3, 1};
    const auto y = random_grid(s, rng);
    const Problem p{make_identity(s), y, Penalizer::squared_norm(make_identity(s))};
    const std::vector<double> alphas{1.0, 0.5, 0.1, 1e-3, 0.0};
    const auto entries = limit_to_best_approximate(p, alphas);
    ASSERT_EQ(entries.size(), alphas.size());
    for (const auto& e : entries) {
        EXPECT_NEAR(e.distance, e.alpha * norm_l2(y) / (1 + e.alpha), 1e-12);
        EXPECT_FALSE(e.flagged);
    }
}

TEST(LimitToBestApproximate, DecreasingTowardPseudoInverse) {
    std::mt19937_64 rng(55);
    // Well-conditioned 20-unknown operator: identity plus a small random part.
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(24, 20);
    a += 0.2 * Eigen::MatrixXd::Random(24, 20);
    const Shape in{5, 4, 1};
    const Shape out{6, 4, 1};
    const auto y = random_grid(out, rng);
    const Problem p{make_dense(a, in, out), y, Penalizer::squared_norm(make_identity(in))};
    const std::vector<double> alphas{1.0, 0.1, 0.01, 0.0};
    SolverOptions opts;
    opts.cg_tolerance = 1e-13;
    const auto entries = limit_to_best_approximate(p, alphas, opts);
    EXPECT_GT(entries[0].distance, entries[1].distance);
    EXPECT_GT(entries[1].distance, entries[2].distance);
    EXPECT_LE(entries[3].distance, 1e-8);

    // Independent pseudo-inverse through the SVD.
    const Eigen::VectorXd dagger = a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(flat(y));
    const Eigen::MatrixXd m = a.transpose() * a + 0.1 * Eigen::MatrixXd::Identity(20, 20);
    const Eigen::VectorXd x01 = m.ldlt().solve(a.transpose() * flat(y));
    EXPECT_NEAR(entries[1].distance, (x01 - dagger).norm(), 1e-10);
}

TEST(LimitToBestApproximate, Preconditions) {
    const Shape s{3, 3, 1};
    const Problem grad{make_identity(s), GridFunction(s), Penalizer::squared_norm(make_gradient(3, 3))};
    const std::vector<double> ok{1.0, 0.1};
    EXPECT_THROW(limit_to_best_approximate(grad, ok), ConfigurationError);
    const Problem id{make_identity(s), GridFunction(s), Penalizer::squared_norm(make_identity(s))};
    const std::vector<double> increasing{0.1, 1.0};
    EXPECT_THROW(limit_to_best_approximate(id, increasing), ParameterError);
    const std::vector<double> negative{1.0, -0.1};
    EXPECT_THROW(limit_to_best_approximate(id, negative), ParameterError);
}
