#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "tikreg/grid.hpp"
#include "tikreg/operators.hpp"
#include "tikreg/solvers.hpp"

namespace tikreg {

/// Below this the complementation constant is treated as zero.
inline constexpr double kDegeneracyThreshold = 1e-14;

struct ComplementationEstimate {
    double k = 0.0;
    /// k <= kDegeneracyThreshold: |Tx|^2 + sum |L_i x|^2 >= k |x|^2 is vacuous
    /// and the stability bounds do not apply.
    bool degenerate = false;
};

/// Largest k with |Tx|^2 + sum_i |L_i x|^2 >= k |x|^2, i.e. the smallest
/// eigenvalue of T^T T + sum_i L_i^T L_i assembled densely.
ComplementationEstimate estimate_complementation_constant(const OperatorHandle& forward,
                                                          const std::vector<OperatorHandle>& ops,
                                                          std::size_t cap = kDenseCap);

/// Perturbations (y_n, alpha_n, T_n) = (y + dy_n, alpha + da_n, T + E_n) for
/// n = 1..count, with magnitudes base_radius * 2^-n. Any of the three lists may
/// be empty; nonempty lists have `count` entries.
struct PerturbationSchedule {
    int count = 0;
    double base_radius = 0.0;
    std::vector<GridFunction> data_deltas;
    std::vector<std::vector<double>> weight_deltas;  // one value per penalty term
    std::vector<OperatorHandle> operator_deltas;     // dense E_n, |E_n|_2 = r 2^-n
};

struct ScheduleChannels {
    bool data = true;
    bool weights = true;
    bool forward = false;
};

/// Random directions scaled to the geometric magnitudes. Weight deltas take a
/// random sign per term and must keep every perturbed weight positive.
PerturbationSchedule make_geometric_schedule(const Problem& p, int count, double base_radius,
                                             std::uint64_t seed, ScheduleChannels channels = {});

struct StabilityOptions {
    /// Final error must be at most this fraction of the first error.
    double tolerance_factor = 0.01;
    SolverOptions solver{10000, 1e-8, 1e-13, std::nullopt};
};

struct StabilityReport {
    std::vector<double> delta_y;          // |y - y_n|
    std::vector<double> delta_alpha_max;  // max_i |alpha_i^n - alpha_i|
    std::vector<double> errors;           // |x_n - x_bar|
    std::vector<double> bound_values;     // right side of the quantitative bound; NaN when T_n != T
    std::vector<double> identity_residuals;  // normalized identity residual; NaN when T_n != T
    double k_estimate = 0.0;
    double adjoint_norm = 0.0;  // |T*|
    bool passed = false;
};

/// Solves the base and every perturbed problem with CG and evaluates
///   |x_bar - x_n| <= (max|da| / min alpha) |x_n| + |T*| / (k min(1, min alpha)) |y - y_n|
/// together with the exact perturbation identity
///   x_bar - x_n = M^{-1} [ sum_i da_i L_i*L_i x_n + T*(y - y_n) ],  M = T*T + sum alpha_i L_i*L_i.
StabilityReport run_stability_experiment(const Problem& p, const PerturbationSchedule& sched,
                                         const StabilityOptions& opts = {});

/// |LHS - RHS| / (1 + |x_bar|) for the single-term identity
///   x_bar - x_n = (alpha_n - alpha) M^{-1} L*L x_n + M^{-1} T*(y - y_n),  M = alpha L*L + T*T.
double check_identity_n3(const OperatorHandle& forward, const OperatorHandle& op, double alpha,
                         double alpha_n, const GridFunction& y, const GridFunction& y_n,
                         const SolverOptions& opts = StabilityOptions{}.solver);

/// (|M^{-1}|_2 measured densely, 1 / (k min(1, min alpha))) for
/// M = T^T T + sum alpha_i L_i^T L_i.
std::pair<double, double> check_operator_bounds_q2_q3(const OperatorHandle& forward,
                                                      const std::vector<OperatorHandle>& ops,
                                                      const std::vector<double>& alphas,
                                                      std::size_t cap = kDenseCap);

/// Max pairwise distance between solve_general minimizers from `starts`
/// random initial guesses.
double probe_uniqueness(const Problem& p, int starts, std::uint64_t seed = 1,
                        const SolverOptions& opts = {});

/// Columns: n, delta_y, delta_alpha_max, error, q4_bound, n3_residual.
void write_stability_csv(const StabilityReport& report, std::ostream& out);

}  // namespace tikreg
