#include "tikreg/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "tikreg/csv.hpp"
#include "tikreg/errors.hpp"
#include "tikreg/random.hpp"

namespace tikreg {

ComplementationEstimate estimate_complementation_constant(const OperatorHandle& forward,
                                                          const std::vector<OperatorHandle>& ops,
                                                          std::size_t cap) {
    std::vector<OperatorHandle> all{forward};
    all.insert(all.end(), ops.begin(), ops.end());
    ComplementationEstimate est;
    est.k = min_eigenvalue_of_normal_sum(all, cap);
    est.degenerate = est.k <= kDegeneracyThreshold;
    return est;
}

namespace {

double largest_singular_value(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.transpose() * m, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
}

constexpr std::uint64_t kDataStream = 0x1000;
constexpr std::uint64_t kWeightStream = 0x2000;
constexpr std::uint64_t kOperatorStream = 0x3000;

}  // namespace

PerturbationSchedule make_geometric_schedule(const Problem& p, int count, double base_radius,
                                             std::uint64_t seed, ScheduleChannels channels) {
    p.validate();
    if (count < 1) throw ParameterError("schedule needs at least one entry");
    if (!(base_radius >= 0.0) || !std::isfinite(base_radius)) {
        throw ParameterError("schedule radius must be nonnegative");
    }
    const auto terms = p.penalizer.quadratic_terms();

    PerturbationSchedule sched;
    sched.count = count;
    sched.base_radius = base_radius;
    Eigen::MatrixXd forward_dense;
    if (channels.forward) forward_dense = assemble_dense(p.forward);

    for (int n = 1; n <= count; ++n) {
        const double magnitude = std::ldexp(base_radius, -n);
        if (channels.data) {
            auto dir = random_normal_grid(p.data.shape(), seed, kDataStream + n);
            const double len = norm_l2(dir);
            dir *= len > 0.0 ? magnitude / len : 0.0;
            sched.data_deltas.push_back(std::move(dir));
        }
        if (channels.weights) {
            const CounterRng rng(seed, kWeightStream + n);
            std::vector<double> deltas;
            for (std::size_t i = 0; i < terms.size(); ++i) {
                const double sign = rng.uniform(i) < 0.5 ? -1.0 : 1.0;
                const double delta = sign * magnitude;
                if (!(terms[i].first + delta > 0.0)) {
                    throw ParameterError("weight perturbation " + std::to_string(delta) +
                                         " would make weight " + std::to_string(terms[i].first) +
                                         " nonpositive");
                }
                deltas.push_back(delta);
            }
            sched.weight_deltas.push_back(std::move(deltas));
        }
        if (channels.forward) {
            const auto noise = random_normal_grid(
                Shape{static_cast<int>(forward_dense.size()), 1, 1}, seed, kOperatorStream + n);
            Eigen::MatrixXd e = Eigen::Map<const Eigen::MatrixXd>(
                noise.values().data(), forward_dense.rows(), forward_dense.cols());
            const double s = largest_singular_value(e);
            e *= s > 0.0 ? magnitude / s : 0.0;
            sched.operator_deltas.push_back(
                make_dense(std::move(e), p.forward.input_shape(), p.forward.output_shape()));
        }
    }
    return sched;
}

namespace {

void validate_schedule(const Problem& p, const PerturbationSchedule& s, std::size_t term_count) {
    const auto n = static_cast<std::size_t>(s.count);
    auto check_len = [&](std::size_t len, const char* what) {
        if (len != 0 && len != n) {
            throw DimensionError(std::string("schedule ") + what + " has " + std::to_string(len) +
                                 " entries, expected " + std::to_string(n));
        }
    };
    check_len(s.data_deltas.size(), "data_deltas");
    check_len(s.weight_deltas.size(), "weight_deltas");
    check_len(s.operator_deltas.size(), "operator_deltas");
    for (const auto& d : s.data_deltas) require_same_shape(d.shape(), p.data.shape(), "schedule data delta");
    for (const auto& w : s.weight_deltas) {
        if (w.size() != term_count) throw DimensionError("schedule weight delta count mismatch");
    }
    for (const auto& e : s.operator_deltas) {
        require_same_shape(e.input_shape(), p.forward.input_shape(), "schedule operator delta input");
        require_same_shape(e.output_shape(), p.forward.output_shape(), "schedule operator delta output");
    }
}

std::vector<OperatorHandle> operators_of(const std::vector<std::pair<double, OperatorHandle>>& terms) {
    std::vector<OperatorHandle> ops;
    ops.reserve(terms.size());
    for (const auto& t : terms) ops.push_back(t.second);
    return ops;
}

GridFunction solve_normal(const OperatorHandle& forward,
                          std::vector<std::pair<double, OperatorHandle>> terms, const GridFunction& rhs,
                          const SolverOptions& opts) {
    SolverOptions o = opts;
    o.initial_guess.reset();
    return conjugate_gradient(NormalOperator(forward, std::move(terms)), rhs, o).solution;
}

}  // namespace

StabilityReport run_stability_experiment(const Problem& p, const PerturbationSchedule& sched,
                                         const StabilityOptions& opts) {
    p.validate();
    const auto terms = p.penalizer.quadratic_terms();
    validate_schedule(p, sched, terms.size());

    StabilityReport report;
    const auto ops = operators_of(terms);
    const auto k = estimate_complementation_constant(p.forward, ops);
    if (k.degenerate) {
        throw DefinitenessError("complementation fails numerically (k = " + std::to_string(k.k) +
                                    "); stability bounds do not apply",
                                k.k);
    }
    report.k_estimate = k.k;
    report.adjoint_norm = largest_singular_value(assemble_dense(p.forward));

    double min_alpha = std::numeric_limits<double>::infinity();
    for (const auto& t : terms) min_alpha = std::min(min_alpha, t.first);
    const double data_factor = report.adjoint_norm / (k.k * std::min(1.0, min_alpha));

    const auto x_bar = solve_normal(p.forward, terms, p.forward.apply_adjoint(p.data), opts.solver);
    const double x_bar_norm = norm_l2(x_bar);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    bool bounds_ok = true;
    bool identity_ok = true;
    for (int n = 0; n < sched.count; ++n) {
        GridFunction y_n = p.data;
        if (!sched.data_deltas.empty()) y_n += sched.data_deltas[n];
        auto terms_n = terms;
        double da_max = 0.0;
        if (!sched.weight_deltas.empty()) {
            for (std::size_t i = 0; i < terms_n.size(); ++i) {
                terms_n[i].first += sched.weight_deltas[n][i];
                da_max = std::max(da_max, std::abs(sched.weight_deltas[n][i]));
                if (!(terms_n[i].first > 0.0)) throw ParameterError("perturbed weight is not positive");
            }
        }
        const bool same_forward = sched.operator_deltas.empty();
        const OperatorHandle forward_n =
            same_forward ? p.forward
                         : make_dense(assemble_dense(p.forward) + assemble_dense(sched.operator_deltas[n]),
                                      p.forward.input_shape(), p.forward.output_shape());

        const auto x_n = solve_normal(forward_n, terms_n, forward_n.apply_adjoint(y_n), opts.solver);
        const double dy = norm_l2(p.data - y_n);
        report.delta_y.push_back(dy);
        report.delta_alpha_max.push_back(da_max);
        report.errors.push_back(norm_l2(x_bar - x_n));

        if (!same_forward) {
            report.bound_values.push_back(nan);
            report.identity_residuals.push_back(nan);
            continue;
        }
        const double bound = da_max / min_alpha * norm_l2(x_n) + data_factor * dy;
        report.bound_values.push_back(bound);
        bounds_ok = bounds_ok && report.errors.back() <= bound * (1.0 + 1e-8);

        // Right side of the identity through one application of M^{-1}.
        GridFunction source = p.forward.apply_adjoint(p.data - y_n);
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const double da = terms_n[i].first - terms[i].first;
            if (da != 0.0) source.axpy(da, ops[i].apply_adjoint(ops[i].apply(x_n)));
        }
        const auto rhs = solve_normal(p.forward, terms, source, opts.solver);
        const double residual = norm_l2((x_bar - x_n) - rhs) / (1.0 + x_bar_norm);
        report.identity_residuals.push_back(residual);
        identity_ok = identity_ok && residual <= 1e-8;
    }

    const bool converging =
        report.errors.empty() || report.errors.back() <= report.errors.front() * opts.tolerance_factor;
    report.passed = converging && bounds_ok && identity_ok;
    return report;
}

double check_identity_n3(const OperatorHandle& forward, const OperatorHandle& op, double alpha,
                         double alpha_n, const GridFunction& y, const GridFunction& y_n,
                         const SolverOptions& opts) {
    if (!(alpha > 0.0) || !(alpha_n > 0.0)) throw ParameterError("identity check needs positive alphas");
    require_same_shape(y.shape(), forward.output_shape(), "identity check y");
    require_same_shape(y_n.shape(), forward.output_shape(), "identity check y_n");
    require_same_shape(op.input_shape(), forward.input_shape(), "identity check L");

    const auto x_bar = solve_normal(forward, {{alpha, op}}, forward.apply_adjoint(y), opts);
    const auto x_n = solve_normal(forward, {{alpha_n, op}}, forward.apply_adjoint(y_n), opts);

    GridFunction lls = op.apply_adjoint(op.apply(x_n));
    lls *= alpha_n - alpha;
    const auto first = solve_normal(forward, {{alpha, op}}, lls, opts);
    const auto second = solve_normal(forward, {{alpha, op}}, forward.apply_adjoint(y - y_n), opts);
    const auto lhs = x_bar - x_n;
    return norm_l2(lhs - first - second) / (1.0 + norm_l2(x_bar));
}

std::pair<double, double> check_operator_bounds_q2_q3(const OperatorHandle& forward,
                                                      const std::vector<OperatorHandle>& ops,
                                                      const std::vector<double>& alphas,
                                                      std::size_t cap) {
    if (ops.size() != alphas.size()) throw DimensionError("one alpha per operator is required");
    if (ops.empty()) throw ParameterError("bound check needs at least one penalty operator");
    double min_alpha = std::numeric_limits<double>::infinity();
    for (double a : alphas) {
        if (!(a > 0.0)) throw ParameterError("bound check alphas must be positive");
        min_alpha = std::min(min_alpha, a);
    }
    const auto k = estimate_complementation_constant(forward, ops, cap);
    if (k.degenerate) {
        throw DefinitenessError("complementation fails numerically (k = " + std::to_string(k.k) + ")", k.k);
    }
    const Eigen::MatrixXd t = assemble_dense(forward, cap);
    Eigen::MatrixXd m = t.transpose() * t;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const Eigen::MatrixXd l = assemble_dense(ops[i], cap);
        m.noalias() += alphas[i] * (l.transpose() * l);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    const double lambda_min = eig.eigenvalues().minCoeff();
    if (!(lambda_min > 0.0)) throw DefinitenessError("normal matrix is not positive definite", lambda_min);
    return {1.0 / lambda_min, 1.0 / (k.k * std::min(1.0, min_alpha))};
}

double probe_uniqueness(const Problem& p, int starts, std::uint64_t seed, const SolverOptions& opts) {
    if (starts < 1) throw ParameterError("uniqueness probe needs at least one start");
    p.validate();
    std::vector<GridFunction> minimizers;
    for (int s = 0; s < starts; ++s) {
        SolverOptions o = opts;
        o.initial_guess = random_normal_grid(p.forward.input_shape(), seed, static_cast<std::uint64_t>(s));
        minimizers.push_back(solve_general(p, o).minimizer);
    }
    double spread = 0.0;
    for (std::size_t i = 0; i < minimizers.size(); ++i) {
        for (std::size_t j = i + 1; j < minimizers.size(); ++j) {
            spread = std::max(spread, norm_l2(minimizers[i] - minimizers[j]));
        }
    }
    return spread;
}

void write_stability_csv(const StabilityReport& report, std::ostream& out) {
    out << "n,delta_y,delta_alpha_max,error,q4_bound,n3_residual\n";
    for (std::size_t i = 0; i < report.errors.size(); ++i) {
        out << (i + 1) << ',' << format_number(report.delta_y[i]) << ','
            << format_number(report.delta_alpha_max[i]) << ',' << format_number(report.errors[i]) << ','
            << format_number(report.bound_values[i]) << ',' << format_number(report.identity_residuals[i])
            << '\n';
    }
}

}  // namespace tikreg
