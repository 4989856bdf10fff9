#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tikreg/solvers.hpp"

namespace tikreg {

/// Residual and penalty of the regularized minimizers over a grid of alphas.
/// Entries are stored in order of decreasing alpha.
struct LCurve {
    std::vector<double> alphas;
    std::vector<double> residual_norms;  // |T x_alpha - y|
    std::vector<double> penalty_values;  // W(x_alpha) without the alpha factor
    std::vector<bool> flagged;           // solver failure or a floored zero entry
    std::vector<bool> converged;
    std::vector<double> curvature;       // signed Menger curvature; NaN where undefined
    std::optional<std::size_t> corner_index;
    /// False when the monotone-exchange post-check failed anywhere.
    bool monotone = true;

    std::size_t usable_points() const;
};

inline constexpr double kLogFloor = 1e-300;

struct SweepOptions {
    SolverOptions solver;
    /// Start each solve from the previous minimizer (sequential sweep).
    bool warm_start = true;
};

/// Log-spaced grid from `high` down to `low` with `count` points.
std::vector<double> log_spaced_alphas(double low, double high, int count);

/// Solves min |Tx - y|^2 + alpha W(x) for each alpha, where W is
/// `problem.penalizer`. Alphas may arrive in any order; they are sorted
/// descending. At least five positive, distinct alphas are required. Quadratic
/// penalizers use CG, others gradient descent.
LCurve sweep(const Problem& problem, std::span<const double> alphas, const SweepOptions& opts = {});

struct Corner {
    double alpha;
    std::size_t index;  // into the curve arrays
};

/// Signed three-point curvature of the log-log curve at each interior usable
/// point, traversed by increasing alpha (positive = convex corner).
std::vector<double> curvatures(const LCurve& curve);

/// Point of maximum positive curvature; ties go to the larger alpha. Throws
/// NoCornerError when no curvature exceeds 1e-12.
Corner corner(const LCurve& curve);

/// Columns: alpha, residual, penalty, curvature, is_corner.
void write_lcurve_csv(const LCurve& curve, std::ostream& out);

}  // namespace tikreg
