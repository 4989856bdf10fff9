#include "tikreg/lcurve.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>

#include "tikreg/csv.hpp"
#include "tikreg/errors.hpp"

namespace tikreg {

std::size_t LCurve::usable_points() const {
    return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), false));
}

std::vector<double> log_spaced_alphas(double low, double high, int count) {
    if (!(low > 0.0) || !(high > low) || count < 2) {
        throw ParameterError("alpha grid needs 0 < low < high and count >= 2");
    }
    std::vector<double> out(count);
    const double a = std::log10(high);
    const double b = std::log10(low);
    for (int i = 0; i < count; ++i) out[i] = std::pow(10.0, a + (b - a) * i / (count - 1));
    out.front() = high;
    out.back() = low;
    return out;
}

namespace {

constexpr double kMonotoneSlack = 1e-10;
constexpr double kCurvatureFloor = 1e-12;

}  // namespace

LCurve sweep(const Problem& problem, std::span<const double> alphas, const SweepOptions& opts) {
    problem.validate();
    if (alphas.size() < 5) {
        throw ParameterError("L-curve sweep needs at least 5 alphas, got " + std::to_string(alphas.size()));
    }
    std::vector<double> sorted(alphas.begin(), alphas.end());
    for (double a : sorted) {
        if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("L-curve alphas must be positive");
    }
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ParameterError("L-curve alphas must be distinct");
    }

    LCurve curve;
    curve.alphas = sorted;
    const bool quadratic = problem.penalizer.is_quadratic();
    std::optional<GridFunction> previous = opts.solver.initial_guess;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (double alpha : sorted) {
        const Problem scaled{problem.forward, problem.data, problem.penalizer.scaled(alpha)};
        SolverOptions o = opts.solver;
        if (opts.warm_start) o.initial_guess = previous;
        try {
            auto report = quadratic ? solve_quadratic(scaled, o) : solve_general(scaled, o);
            auto residual = problem.forward.apply(report.minimizer);
            residual -= problem.data;
            double r = norm_l2(residual);
            double w = problem.penalizer.value(report.minimizer);
            bool floored = false;
            if (!(r > 0.0)) r = kLogFloor, floored = true;
            if (!(w > 0.0)) w = kLogFloor, floored = true;
            curve.residual_norms.push_back(r);
            curve.penalty_values.push_back(w);
            curve.flagged.push_back(floored);
            curve.converged.push_back(report.converged);
            previous = std::move(report.minimizer);
        } catch (const NumericalError&) {
            curve.residual_norms.push_back(nan);
            curve.penalty_values.push_back(nan);
            curve.flagged.push_back(true);
            curve.converged.push_back(false);
        }
    }

    if (curve.usable_points() < 5) {
        throw SweepError("L-curve sweep left only " + std::to_string(curve.usable_points()) +
                         " usable points");
    }

    // Monotone exchange: smaller alpha never has a larger residual or a smaller penalty.
    std::size_t last = curve.alphas.size();
    for (std::size_t i = 0; i < curve.alphas.size(); ++i) {
        if (curve.flagged[i]) continue;
        if (last != curve.alphas.size()) {
            // alphas[last] > alphas[i]
            if (curve.residual_norms[i] > curve.residual_norms[last] + kMonotoneSlack ||
                curve.penalty_values[i] < curve.penalty_values[last] - kMonotoneSlack) {
                curve.monotone = false;
            }
        }
        last = i;
    }

    curve.curvature = curvatures(curve);
    try {
        curve.corner_index = corner(curve).index;
    } catch (const NoCornerError&) {
        curve.corner_index.reset();
    }
    return curve;
}

std::vector<double> curvatures(const LCurve& curve) {
    const std::size_t n = curve.alphas.size();
    std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
    // Usable indices by increasing alpha (the arrays are stored decreasing).
    std::vector<std::size_t> idx;
    for (std::size_t i = n; i-- > 0;) {
        if (!curve.flagged[i]) idx.push_back(i);
    }
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        const auto point = [&](std::size_t i) {
            return std::pair{std::log(curve.residual_norms[i]), std::log(curve.penalty_values[i])};
        };
        const auto [ax, ay] = point(idx[k - 1]);
        const auto [bx, by] = point(idx[k]);
        const auto [cx, cy] = point(idx[k + 1]);
        const double cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx);
        const double ab = std::hypot(bx - ax, by - ay);
        const double bc = std::hypot(cx - bx, cy - by);
        const double ca = std::hypot(ax - cx, ay - cy);
        const double denom = ab * bc * ca;
        out[idx[k]] = denom > 0.0 ? 2.0 * cross / denom : 0.0;
    }
    return out;
}

Corner corner(const LCurve& curve) {
    if (curve.usable_points() < 5) {
        throw SweepError("corner needs at least 5 usable points, got " +
                         std::to_string(curve.usable_points()));
    }
    const auto kappa = curvatures(curve);
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < kappa.size(); ++i) {
        if (std::isnan(kappa[i]) || kappa[i] <= kCurvatureFloor) continue;
        // Strict improvement only: scanning by decreasing alpha keeps the
        // larger alpha on ties.
        if (!best || kappa[i] > kappa[*best]) best = i;
    }
    if (!best) throw NoCornerError("L-curve has no convex corner (curvature <= 1e-12 everywhere)");
    return Corner{curve.alphas[*best], *best};
}

void write_lcurve_csv(const LCurve& curve, std::ostream& out) {
    out << "alpha,residual,penalty,curvature,is_corner\n";
    const auto kappa = curve.curvature.size() == curve.alphas.size() ? curve.curvature : curvatures(curve);
    for (std::size_t i = 0; i < curve.alphas.size(); ++i) {
        const bool is_corner = curve.corner_index && *curve.corner_index == i;
        out << format_number(curve.alphas[i]) << ',' << format_number(curve.residual_norms[i]) << ','
            << format_number(curve.penalty_values[i]) << ',' << format_number(kappa[i]) << ','
            << (is_corner ? 1 : 0) << '\n';
    }
}

}  // namespace tikreg
