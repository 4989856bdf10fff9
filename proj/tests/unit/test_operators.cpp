#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "support/oracles.hpp"
#include "tikreg/errors.hpp"
#include "tikreg/operators.hpp"

using namespace tikreg;
using tikreg::testing::flat;
using tikreg::testing::random_grid;

namespace {

std::vector<OperatorHandle> sample_operators(int w, int h, std::mt19937_64& rng) {
    std::vector<OperatorHandle> ops;
    ops.push_back(make_identity(Shape{w, h, 1}));
    ops.push_back(make_gaussian_blur(w, h, 6.0, 3));
    ops.push_back(make_gaussian_blur(w, h, 0.3, 2));
    ops.push_back(make_gradient(w, h));
    ops.push_back(make_structural(StructuralField{random_grid(Shape{w, h, 1}, rng, 0.0, 3.0), 5.0}));
    Eigen::MatrixXd m = Eigen::MatrixXd::Random(3 * w, w * h);
    ops.push_back(make_dense(m, Shape{w, h, 1}, Shape{3, w, 1}));
    return ops;
}

double adjoint_mismatch(const OperatorHandle& op, std::mt19937_64& rng) {
    const auto x = random_grid(op.input_shape(), rng);
    const auto y = random_grid(op.output_shape(), rng);
    const double lhs = inner_product(op.apply(x), y);
    const double rhs = inner_product(x, op.apply_adjoint(y));
    return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
}

}  // namespace

TEST(Identity, ApplyReturnsInput) {
    std::mt19937_64 rng(1);
    const auto x = random_grid(Shape{4, 3, 2}, rng);
    EXPECT_EQ(make_identity(x.shape()).apply(x), x);
}

TEST(Operators, ShapeMismatchIsDimensionError) {
    const auto grad = make_gradient(4, 4);
    EXPECT_THROW(grad.apply(GridFunction(Shape{3, 4, 1})), DimensionError);
    EXPECT_THROW(grad.apply_adjoint(GridFunction(Shape{4, 4, 1})), DimensionError);
}

TEST(GaussianBlur, CenterWeightBeforeNormalization) {
    EXPECT_NEAR(psf_weight(6.0, 0, 0), 6.0 / std::numbers::pi, 1e-15);
    EXPECT_NEAR(psf_weight(6.0, 0, 0), 1.90986, 1e-5);
}

TEST(GaussianBlur, ConstantsAreFixedPoints) {
    const auto blur = make_gaussian_blur(9, 7, 6.0, 3);
    const GridFunction c(Shape{9, 7, 1}, 0.37);
    const auto out = blur.apply(c);
    for (std::size_t k = 0; k < out.size(); ++k) EXPECT_NEAR(out[k], 0.37, 1e-15);
}

TEST(GaussianBlur, ImpulseResponseIsTheNormalizedStencil) {
    const int n = 9;
    const int r = 3;
    const double kappa = 0.5;
    GridFunction impulse(Shape{n, n, 1});
    impulse.at(4, 4) = 1.0;
    const auto response = make_gaussian_blur(n, n, kappa, r).apply(impulse);
    const auto stencil = gaussian_stencil(kappa, r);
    double total = 0.0;
    for (double s : stencil) total += s;
    EXPECT_NEAR(total, 1.0, 1e-15);
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            EXPECT_NEAR(response.at(4 + dy, 4 + dx), stencil[(dy + r) * (2 * r + 1) + (dx + r)], 1e-15);
    EXPECT_EQ(norm_linf(response), response.at(4, 4));
}

TEST(GaussianBlur, TruncationTailAtRadiusThreeIsNegligible) {
    // Brute-force 2D tail over a stencil wide enough that the rest underflows.
    const double kappa = 6.0;
    double inside = 0.0;
    double total = 0.0;
    for (int dy = -30; dy <= 30; ++dy)
        for (int dx = -30; dx <= 30; ++dx) {
            const double w = psf_weight(kappa, dx, dy);
            total += w;
            if (std::abs(dx) <= 3 && std::abs(dy) <= 3) inside += w;
        }
    const double oracle = (total - inside) / total;
    EXPECT_LT(oracle, 1e-8);
    EXPECT_LT(discarded_tail_mass(kappa, 3), 1e-8);
    EXPECT_NEAR(discarded_tail_mass(kappa, 3), oracle, 1e-15);
    // A wide kernel has a visible tail and the two computations still agree.
    double in2 = 0.0, tot2 = 0.0;
    for (int dy = -60; dy <= 60; ++dy)
        for (int dx = -60; dx <= 60; ++dx) {
            const double w = psf_weight(0.05, dx, dy);
            tot2 += w;
            if (std::abs(dx) <= 4 && std::abs(dy) <= 4) in2 += w;
        }
    EXPECT_NEAR(discarded_tail_mass(0.05, 4), (tot2 - in2) / tot2, 1e-12);
}

TEST(GaussianBlur, MatchesEntrywiseMatrixOracle) {
    std::mt19937_64 rng(2);
    for (auto [w, h, kappa, r] : {std::tuple{8, 8, 6.0, 3}, std::tuple{5, 7, 0.4, 2}, std::tuple{3, 2, 0.1, 5}}) {
        const auto blur = make_gaussian_blur(w, h, kappa, r);
        const auto oracle = tikreg::testing::blur_matrix_oracle(w, h, kappa, r);
        EXPECT_LE((assemble_dense(blur) - oracle).cwiseAbs().maxCoeff(), 1e-14);
        const auto x = random_grid(Shape{w, h, 1}, rng);
        EXPECT_LE((flat(blur.apply(x)) - oracle * flat(x)).norm(), 1e-12 * flat(x).norm());
        // Row sums one, symmetric, positive.
        EXPECT_LE((oracle.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-14);
        EXPECT_LE((oracle - oracle.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(GaussianBlur, SelfAdjoint) {
    std::mt19937_64 rng(3);
    const auto blur = make_gaussian_blur(6, 5, 1.0, 2);
    const auto y = random_grid(Shape{6, 5, 1}, rng);
    EXPECT_EQ(blur.apply_adjoint(y), blur.apply(y));
}

TEST(GaussianBlur, ParameterErrors) {
    EXPECT_THROW(make_gaussian_blur(4, 4, 0.0, 3), ParameterError);
    EXPECT_THROW(make_gaussian_blur(4, 4, -1.0, 3), ParameterError);
    EXPECT_THROW(make_gaussian_blur(4, 4, 6.0, 0), ParameterError);
}

TEST(GaussianBlur, HugeKappaIsIdentity) {
    std::mt19937_64 rng(4);
    const auto x = random_grid(Shape{5, 5, 1}, rng);
    EXPECT_EQ(make_gaussian_blur(5, 5, 1e6, 1).apply(x), x);
}

TEST(Gradient, ConstantsAndRamp) {
    const auto grad = make_gradient(5, 4);
    EXPECT_EQ(norm_linf(grad.apply(GridFunction(Shape{5, 4, 1}, 2.5))), 0.0);

    GridFunction ramp(Shape{5, 4, 1});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j) ramp.at(i, j) = j;
    const auto g = grad.apply(ramp);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 5; ++j) {
            EXPECT_EQ(g.at(i, j, 0), j < 4 ? 1.0 : 0.0);
            EXPECT_EQ(g.at(i, j, 1), 0.0);
        }
    }
}

TEST(Gradient, MatchesDenseOracleAndTranspose) {
    std::mt19937_64 rng(5);
    const auto grad = make_gradient(5, 4);
    const auto oracle = tikreg::testing::gradient_matrix_oracle(5, 4);
    EXPECT_EQ(assemble_dense(grad), oracle);
    const auto y = random_grid(Shape{5, 4, 2}, rng);
    EXPECT_LE((flat(grad.apply_adjoint(y)) - oracle.transpose() * flat(y)).norm(), 1e-13);
}

TEST(Gradient, DegenerateSizes) {
    EXPECT_THROW(make_gradient(1, 5), ParameterError);
    EXPECT_THROW(make_gradient(5, 1), ParameterError);
}

TEST(Structural, FlatGammaGivesPlainGradient) {
    std::mt19937_64 rng(6);
    const auto x = random_grid(Shape{6, 5, 1}, rng);
    for (double c : {0.1, 1.0, 5.0, 1e6}) {
        const auto s = make_structural(StructuralField{GridFunction(Shape{6, 5, 1}, 0.8), c});
        EXPECT_EQ(s.apply(x), make_gradient(6, 5).apply(x));
    }
}

TEST(Structural, MatrixAtUnitGradient) {
    const auto a = structural_matrix(1.0, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(a.a11, 0.5);
    EXPECT_DOUBLE_EQ(a.a12, 0.0);
    EXPECT_DOUBLE_EQ(a.a22, 1.0);
}

TEST(Structural, EigenStructurePerPixel) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 500; ++trial) {
        const double gx = u(rng), gy = u(rng), c = 0.5 + std::abs(u(rng)) * 5;
        const auto a = structural_matrix(gx, gy, c);
        Eigen::Matrix2d m;
        m << a.a11, a.a12, a.a12, a.a22;
        const double s = gx * gx + gy * gy;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m);
        const double along = 1.0 - s / (1.0 + c * s);
        Eigen::Vector2d expected(std::min(along, 1.0), std::max(along, 1.0));
        EXPECT_NEAR(eig.eigenvalues()[0], expected[0], 1e-12);
        EXPECT_NEAR(eig.eigenvalues()[1], expected[1], 1e-12);
        if (s > 0) {
            const Eigen::Vector2d g(gx, gy);
            EXPECT_LE((m * g - along * g).norm(), 1e-12 * g.norm());
            const Eigen::Vector2d perp(-gy, gx);
            EXPECT_LE((m * perp - perp).norm(), 1e-12 * perp.norm());
        }
    }
}

TEST(Structural, ContractionForCAtLeastOne) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double c = 1.0 + std::abs(u(rng));
        const auto a = structural_matrix(u(rng), u(rng), c);
        const double vx = u(rng), vy = u(rng);
        const double ox = a.a11 * vx + a.a12 * vy, oy = a.a12 * vx + a.a22 * vy;
        EXPECT_LE(std::hypot(ox, oy), std::hypot(vx, vy) * (1 + 1e-14));
        EXPECT_GT(a.a11 * a.a22 - a.a12 * a.a12, 0.0);  // both eigenvalues positive
    }
}

TEST(Structural, AnnihilatesConstantsAndChecksShapes) {
    std::mt19937_64 rng(9);
    const auto s = make_structural(StructuralField{random_grid(Shape{5, 5, 1}, rng), 5.0});
    EXPECT_EQ(norm_linf(s.apply(GridFunction(Shape{5, 5, 1}, 3.0))), 0.0);
    EXPECT_THROW(s.apply(GridFunction(Shape{4, 5, 1})), DimensionError);
    EXPECT_THROW(make_structural(StructuralField{GridFunction(Shape{5, 5, 2}), 5.0}), DimensionError);
    EXPECT_THROW(make_structural(StructuralField{GridFunction(Shape{5, 5, 1}), 0.0}), ParameterError);
}

TEST(AssembleDense, SmallExamplesAndCap) {
    EXPECT_EQ(assemble_dense(make_identity(Shape{2, 2, 1})), Eigen::MatrixXd::Identity(4, 4));
    const auto g = assemble_dense(make_gradient(2, 2));
    EXPECT_EQ(g.rows(), 8);
    EXPECT_EQ(g.cols(), 4);
    EXPECT_EQ(g.rowwise().sum().cwiseAbs().maxCoeff(), 0.0);
    try {
        assemble_dense(make_identity(Shape{65, 64, 1}));
        FAIL();
    } catch (const CapacityError& e) {
        EXPECT_EQ(e.cap(), kDenseCap);
        EXPECT_NE(std::string(e.what()).find("4096"), std::string::npos);
    }
    EXPECT_NO_THROW(assemble_dense(make_identity(Shape{64, 64, 1})));
}

TEST(AssembleDense, AgreesWithApplyOnProbes) {
    std::mt19937_64 rng(10);
    for (const auto& op : sample_operators(4, 4, rng)) {
        const auto m = assemble_dense(op);
        for (int probe = 0; probe < 5; ++probe) {
            const auto x = random_grid(op.input_shape(), rng);
            EXPECT_LE((m * flat(x) - flat(op.apply(x))).norm(), 1e-12 * std::max(1.0, flat(x).norm()))
                << to_string(op.kind());
            const auto y = random_grid(op.output_shape(), rng);
            EXPECT_LE((m.transpose() * flat(y) - flat(op.apply_adjoint(y))).norm(),
                      1e-12 * std::max(1.0, flat(y).norm()))
                << to_string(op.kind());
        }
    }
}

TEST(OperatorProperties, HundredAdjointProbesEach) {
    std::mt19937_64 rng(11);
    for (const auto& op : sample_operators(7, 6, rng)) {
        double worst = 0.0;
        for (int probe = 0; probe < 100; ++probe) worst = std::max(worst, adjoint_mismatch(op, rng));
        EXPECT_LE(worst, 1e-10) << to_string(op.kind());
    }
}

TEST(OperatorProperties, Linearity) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    for (const auto& op : sample_operators(6, 5, rng)) {
        for (int probe = 0; probe < 10; ++probe) {
            const auto x = random_grid(op.input_shape(), rng);
            const auto y = random_grid(op.input_shape(), rng);
            const double a = coef(rng), b = coef(rng);
            const auto lhs = op.apply(a * x + b * y);
            const auto rhs = a * op.apply(x) + b * op.apply(y);
            EXPECT_LE(tikreg::testing::rel_err(lhs, rhs), 1e-10) << to_string(op.kind());
        }
    }
}

TEST(OperatorProperties, InjectivityMetadata) {
    std::mt19937_64 rng(13);
    EXPECT_TRUE(make_identity(Shape{3, 3, 1}).known_injective());
    EXPECT_TRUE(make_gaussian_blur(8, 8, 6.0, 3).known_injective());
    EXPECT_FALSE(make_gradient(3, 3).known_injective());
    EXPECT_FALSE(make_dense(Eigen::MatrixXd::Zero(4, 4), Shape{2, 2, 1}, Shape{2, 2, 1}).known_injective());
    EXPECT_TRUE(make_dense(Eigen::MatrixXd::Identity(4, 4), Shape{2, 2, 1}, Shape{2, 2, 1}).known_injective());
    EXPECT_THROW(make_dense(Eigen::MatrixXd::Zero(3, 4), Shape{2, 2, 1}, Shape{2, 2, 1}), DimensionError);
}

TEST(OperatorProperties, ConcurrentApplicationIsSafe) {
    std::mt19937_64 rng(14);
    const auto blur = make_gaussian_blur(32, 32, 6.0, 3);
    const auto s = make_structural(StructuralField{random_grid(Shape{32, 32, 1}, rng), 5.0});
    const auto x = random_grid(Shape{32, 32, 1}, rng);
    const auto expected_blur = blur.apply(x);
    const auto expected_s = s.apply_adjoint(s.apply(x));
    std::vector<std::thread> threads;
    std::vector<int> ok(8, 0);
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            bool good = true;
            for (int rep = 0; rep < 20; ++rep) {
                good = good && blur.apply(x) == expected_blur && s.apply_adjoint(s.apply(x)) == expected_s;
            }
            ok[t] = good ? 1 : 0;
        });
    }
    for (auto& th : threads) th.join();
    for (int v : ok) EXPECT_EQ(v, 1);
}
