#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tikreg/grid.hpp"
#include "tikreg/operators.hpp"
#include "tikreg/penalizers.hpp"

namespace tikreg {

/// J(x) = |T x - y|^2 + W(x).
struct Problem {
    OperatorHandle forward;
    GridFunction data;
    Penalizer penalizer;

    /// Throws DimensionError when T, y and W disagree on shapes.
    void validate() const;
};

struct SolverOptions {
    int max_iterations = 2000;
    double gradient_tolerance = 1e-8;  // absolute, on |grad J|
    double cg_tolerance = 1e-10;       // relative residual of the normal equations
    std::optional<GridFunction> initial_guess;
};

struct SolveReport {
    GridFunction minimizer;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    /// |M x - T*y| / |T*y| for the CG path; |grad J| / |grad J(x0)| for descent.
    double relative_residual = 0.0;
    std::vector<double> objective_trace;
    /// CG: relative_residual <= cg_tolerance. Descent: final_gradient_norm <= gradient_tolerance.
    bool converged = false;
};

double objective(const Problem& p, const GridFunction& x);

/// M x = T*T x + sum_i w_i L_i*L_i x, applied matrix-free.
class NormalOperator {
public:
    NormalOperator(OperatorHandle forward, std::vector<std::pair<double, OperatorHandle>> terms);

    const Shape& shape() const { return forward_.input_shape(); }
    GridFunction apply(const GridFunction& x) const;

private:
    OperatorHandle forward_;
    std::vector<std::pair<double, OperatorHandle>> terms_;
};

struct CgResult {
    GridFunction solution;
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    /// 1/2 x'Mx - b'x after each iterate, starting with the initial guess.
    std::vector<double> energy_trace;
};

/// Conjugate gradients for M x = rhs from opts.initial_guess (or zero).
/// Throws DefinitenessError on nonpositive curvature.
CgResult conjugate_gradient(const NormalOperator& normal, const GridFunction& rhs,
                            const SolverOptions& opts = {});

/// Minimizer of an all-quadratic problem via CG on the normal equations.
SolveReport solve_quadratic(const Problem& p, const SolverOptions& opts = {});

/// Gradient descent with Armijo backtracking (constant 1e-4, step halving, at
/// most 60 halvings). Trial steps use the Barzilai-Borwein length; every
/// accepted step strictly decreases J.
SolveReport solve_general(const Problem& p, const SolverOptions& opts = {});

/// Dense Cholesky solve of the normal equations; independent of the CG path.
GridFunction solve_dense_oracle(const Problem& p, std::size_t cap = kDenseCap);

struct LimitEntry {
    double alpha = 0.0;
    double distance = 0.0;  // |x_alpha - x_dagger|
    bool flagged = false;   // CG missed its tolerance for this alpha
};

/// Distances from the order-zero Tikhonov minimizers x_alpha to the minimum-norm
/// least-squares solution x_dagger (dense pseudo-inverse). `p.penalizer` must be
/// a squared norm of the identity; its weight is replaced by each alpha. An
/// alpha of 0 solves the plain normal equations.
std::vector<LimitEntry> limit_to_best_approximate(const Problem& p, std::span<const double> alphas,
                                                  const SolverOptions& opts = {});

}  // namespace tikreg
