#include "tikreg/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tikreg/errors.hpp"

namespace tikreg {

void Problem::validate() const {
    if (!forward.valid()) throw ParameterError("problem has no forward operator");
    require_same_shape(forward.output_shape(), data.shape(), "problem data vs forward output");
    require_same_shape(forward.input_shape(), penalizer.input_shape(), "problem penalizer vs forward input");
}

double objective(const Problem& p, const GridFunction& x) {
    p.validate();
    auto residual = p.forward.apply(x);
    residual -= p.data;
    return inner_product(residual, residual) + p.penalizer.value(x);
}

NormalOperator::NormalOperator(OperatorHandle forward,
                               std::vector<std::pair<double, OperatorHandle>> terms)
    : forward_(std::move(forward)), terms_(std::move(terms)) {
    for (const auto& [w, op] : terms_) {
        require_same_shape(op.input_shape(), forward_.input_shape(), "normal operator term");
        if (!(w >= 0.0)) throw ParameterError("normal operator weights must be nonnegative");
    }
}

GridFunction NormalOperator::apply(const GridFunction& x) const {
    auto out = forward_.apply_adjoint(forward_.apply(x));
    for (const auto& [w, op] : terms_) out.axpy(w, op.apply_adjoint(op.apply(x)));
    return out;
}

CgResult conjugate_gradient(const NormalOperator& normal, const GridFunction& rhs,
                            const SolverOptions& opts) {
    require_same_shape(rhs.shape(), normal.shape(), "conjugate_gradient rhs");
    if (!(opts.cg_tolerance > 0.0)) throw ParameterError("cg_tolerance must be positive");

    CgResult result;
    GridFunction x = opts.initial_guess ? *opts.initial_guess : GridFunction(normal.shape());
    require_same_shape(x.shape(), normal.shape(), "conjugate_gradient initial guess");

    const double rhs_norm = norm_l2(rhs);
    if (rhs_norm == 0.0) {
        // The unique solution of a definite system with zero right-hand side.
        result.solution = GridFunction(normal.shape());
        result.converged = true;
        result.energy_trace.push_back(0.0);
        return result;
    }
    const double target = opts.cg_tolerance * rhs_norm;

    GridFunction r = rhs - normal.apply(x);
    auto energy = [&] { return -0.5 * (inner_product(rhs, x) + inner_product(r, x)); };
    result.energy_trace.push_back(energy());

    GridFunction p = r;
    double rr = inner_product(r, r);
    int it = 0;
    while (it < opts.max_iterations) {
        if (std::sqrt(rr) <= target) {
            // Confirm against the true residual; restart if recursion drifted.
            r = rhs - normal.apply(x);
            rr = inner_product(r, r);
            if (std::sqrt(rr) <= target) break;
            p = r;
        }
        const auto mp = normal.apply(p);
        const double curvature = inner_product(p, mp);
        const double pp = inner_product(p, p);
        if (!(curvature > 0.0)) {
            throw DefinitenessError("normal equations are not positive definite: Rayleigh quotient " +
                                        std::to_string(curvature / pp) + " at CG iteration " +
                                        std::to_string(it),
                                    curvature / pp);
        }
        const double step = rr / curvature;
        x.axpy(step, p);
        r.axpy(-step, mp);
        const double rr_next = inner_product(r, r);
        p *= rr_next / rr;
        p += r;
        rr = rr_next;
        ++it;
        result.energy_trace.push_back(energy());
    }

    const auto true_residual = rhs - normal.apply(x);
    result.relative_residual = norm_l2(true_residual) / rhs_norm;
    result.converged = result.relative_residual <= opts.cg_tolerance;
    result.iterations = it;
    result.solution = std::move(x);
    return result;
}

SolveReport solve_quadratic(const Problem& p, const SolverOptions& opts) {
    p.validate();
    if (!p.penalizer.is_quadratic()) {
        throw ConfigurationError("solve_quadratic needs squared-norm penalty terms; penalizer " +
                                 to_string(p.penalizer.kind()) + " must use solve_general");
    }
    const NormalOperator normal(p.forward, p.penalizer.quadratic_terms());
    const auto rhs = p.forward.apply_adjoint(p.data);
    auto cg = conjugate_gradient(normal, rhs, opts);

    SolveReport report;
    const double data_sq = inner_product(p.data, p.data);
    report.objective_trace.reserve(cg.energy_trace.size());
    for (double e : cg.energy_trace) report.objective_trace.push_back(data_sq + 2.0 * e);
    report.iterations = cg.iterations;
    report.relative_residual = cg.relative_residual;
    report.converged = cg.converged;
    // grad J = 2 (M x - T*y)
    report.final_gradient_norm = 2.0 * norm_l2(normal.apply(cg.solution) - rhs);
    report.minimizer = std::move(cg.solution);
    return report;
}

namespace {

struct Evaluation {
    GridFunction residual;  // T x - y
    GridFunction gradient;  // grad J
    double gradient_norm;
};

Evaluation evaluate(const Problem& p, const GridFunction& x) {
    Evaluation e;
    e.residual = p.forward.apply(x);
    e.residual -= p.data;
    e.gradient = p.penalizer.gradient(x);
    e.gradient.axpy(2.0, p.forward.apply_adjoint(e.residual));
    e.gradient_norm = norm_l2(e.gradient);
    return e;
}

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

}  // namespace

SolveReport solve_general(const Problem& p, const SolverOptions& opts) {
    p.validate();
    if (!p.penalizer.is_differentiable()) {
        throw ConfigurationError("solve_general needs a differentiable penalizer; " +
                                 to_string(p.penalizer.kind()) + " requires eps > 0");
    }
    if (!(opts.gradient_tolerance > 0.0)) throw ParameterError("gradient_tolerance must be positive");

    GridFunction x = opts.initial_guess ? *opts.initial_guess : GridFunction(p.forward.input_shape());
    require_same_shape(x.shape(), p.forward.input_shape(), "solve_general initial guess");

    SolveReport report;
    auto eval = evaluate(p, x);
    const double initial_gradient_norm = eval.gradient_norm;
    double j = inner_product(eval.residual, eval.residual) + p.penalizer.value(x);
    report.objective_trace.push_back(j);

    double trial = 1.0;
    int it = 0;
    while (eval.gradient_norm > opts.gradient_tolerance && it < opts.max_iterations) {
        auto direction = eval.gradient;
        direction *= -1.0;

        // J(x + t d) - J(x), data part: t (2 <Tx - y, Td> + t |Td|^2).
        const auto td = p.forward.apply(direction);
        const double cross = inner_product(eval.residual, td);
        const double td_sq = inner_product(td, td);
        const auto ray = p.penalizer.ray(x, direction);
        const double slope = eval.gradient_norm * eval.gradient_norm;

        double t = trial;
        double delta = 0.0;
        int halvings = 0;
        for (;;) {
            delta = t * (2.0 * cross + t * td_sq) + ray.change(t);
            if (delta <= -kArmijo * t * slope && delta < 0.0) break;
            if (++halvings > kMaxHalvings) {
                throw StagnationError("line search failed after " + std::to_string(kMaxHalvings) +
                                          " halvings at iteration " + std::to_string(it) +
                                          " with |grad J| = " + std::to_string(eval.gradient_norm) +
                                          " and J = " + std::to_string(j),
                                      it, eval.gradient_norm);
            }
            t *= 0.5;
        }

        x.axpy(t, direction);
        j += delta;
        report.objective_trace.push_back(j);
        ++it;

        auto next = evaluate(p, x);
        // Barzilai-Borwein length s's / s'y for the next trial step.
        GridFunction s = direction;
        s *= t;
        GridFunction yk = next.gradient - eval.gradient;
        const double sy = inner_product(s, yk);
        trial = sy > 0.0 ? inner_product(s, s) / sy : 2.0 * t;
        trial = std::clamp(trial, 1e-30, 1e30);
        eval = std::move(next);
    }

    report.iterations = it;
    report.final_gradient_norm = eval.gradient_norm;
    report.relative_residual =
        initial_gradient_norm > 0.0 ? eval.gradient_norm / initial_gradient_norm : 0.0;
    report.converged = eval.gradient_norm <= opts.gradient_tolerance;
    report.minimizer = std::move(x);
    return report;
}

GridFunction solve_dense_oracle(const Problem& p, std::size_t cap) {
    p.validate();
    const auto terms = p.penalizer.quadratic_terms();
    const Eigen::MatrixXd t = assemble_dense(p.forward, cap);
    Eigen::MatrixXd m = t.transpose() * t;
    for (const auto& [w, op] : terms) {
        const Eigen::MatrixXd l = assemble_dense(op, cap);
        m.noalias() += w * (l.transpose() * l);
    }
    const Eigen::VectorXd b = t.transpose() * to_vector(p.data);
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-15) {
        const double rq = llt.info() == Eigen::Success ? llt.rcond() * m.norm() : 0.0;
        throw DefinitenessError("dense normal matrix is singular or indefinite", rq);
    }
    return from_vector(llt.solve(b), p.forward.input_shape());
}

std::vector<LimitEntry> limit_to_best_approximate(const Problem& p, std::span<const double> alphas,
                                                  const SolverOptions& opts) {
    p.validate();
    const auto& terms = p.penalizer.terms();
    if (p.penalizer.kind() != PenalizerKind::squared_norm || terms.size() != 1 ||
        terms.front().op.kind() != OperatorKind::identity) {
        throw ConfigurationError("limit_to_best_approximate needs W = |x|^2");
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] >= 0.0)) throw ParameterError("alphas must be nonnegative");
        if (i > 0 && !(alphas[i] < alphas[i - 1])) throw ParameterError("alphas must strictly decrease");
    }

    const Eigen::MatrixXd t = assemble_dense(p.forward);
    const Eigen::VectorXd dagger =
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(t).solve(to_vector(p.data));
    const auto x_dagger = from_vector(dagger, p.forward.input_shape());
    const auto rhs = p.forward.apply_adjoint(p.data);
    const auto identity = make_identity(p.forward.input_shape());

    std::vector<LimitEntry> out;
    for (double alpha : alphas) {
        std::vector<std::pair<double, OperatorHandle>> reg;
        if (alpha > 0.0) reg.emplace_back(alpha, identity);
        const auto cg = conjugate_gradient(NormalOperator(p.forward, std::move(reg)), rhs, opts);
        out.push_back(LimitEntry{alpha, norm_l2(cg.solution - x_dagger), !cg.converged});
    }
    return out;
}

}  // namespace tikreg
