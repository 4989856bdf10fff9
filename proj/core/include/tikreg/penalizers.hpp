#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tikreg/grid.hpp"
#include "tikreg/operators.hpp"

namespace tikreg {

enum class PenalizerKind { squared_norm, seminorm_power, weighted_sum, total_variation, bv_norm };

std::string to_string(PenalizerKind kind);

/// One summand weight * |L x|^exponent.
struct PenaltyTerm {
    double weight = 1.0;
    OperatorHandle op;
    double exponent = 2.0;
};

inline constexpr double kDefaultTvEpsilon = 1e-3;

/// The functional W with value, gradient and metadata.
///
/// Every penalizer carries an overall multiplier (the regularization
/// parameter); `scaled` returns a copy with the multiplier multiplied by alpha.
/// Total variation is the isotropic sum of sqrt(|grad x|^2 + eps^2) - eps over
/// pixels using the forward-difference gradient; the BV norm adds the smoothed
/// l1 term sum sqrt(x^2 + eps^2) - eps. Both are nonnegative and vanish on
/// constants (TV) or zero (BV).
class Penalizer {
public:
    static Penalizer squared_norm(OperatorHandle op);
    static Penalizer seminorm_power(OperatorHandle op, double exponent);
    static Penalizer total_variation(int width, int height, double eps = kDefaultTvEpsilon);
    static Penalizer bv_norm(int width, int height, double eps = kDefaultTvEpsilon);
    friend Penalizer make_weighted_sum(std::vector<PenaltyTerm> terms, bool verify_null_space);

    PenalizerKind kind() const noexcept { return kind_; }
    /// Power terms: one for squared_norm/seminorm_power, all for weighted_sum,
    /// none for the TV kinds.
    const std::vector<PenaltyTerm>& terms() const noexcept { return terms_; }
    double smoothing_eps() const noexcept { return eps_; }
    double multiplier() const noexcept { return multiplier_; }
    /// W(x) >= -lower_bound for all x.
    double lower_bound() const noexcept { return 0.0; }
    bool strictly_convex() const noexcept { return strictly_convex_; }
    const Shape& input_shape() const noexcept { return input_; }

    Penalizer scaled(double alpha) const;

    /// Every term is a squared norm (exponent 2), so the minimizer solves
    /// linear normal equations.
    bool is_quadratic() const noexcept;
    /// Gradient is defined everywhere (TV kinds need eps > 0).
    bool is_differentiable() const noexcept;

    /// (effective weight, operator) pairs; throws ConfigurationError unless quadratic.
    std::vector<std::pair<double, OperatorHandle>> quadratic_terms() const;

    double value(const GridFunction& x) const;
    GridFunction gradient(const GridFunction& x) const;

    /// W restricted to the ray x + t d. Operator images are computed once, so
    /// repeated `change` calls during a line search are cheap. The change is
    /// evaluated without subtracting two large values.
    class Ray {
    public:
        double change(double t) const;

    private:
        friend class Penalizer;
        struct Power {
            double weight;
            double exponent;
            double base_sq;  // |Lx|^2
            double cross;    // <Lx, Ld>
            double dir_sq;   // |Ld|^2
        };
        std::vector<Power> powers_;
        double tv_weight_ = 0.0;
        double l1_weight_ = 0.0;
        double eps_ = 0.0;
        GridFunction grad_x_;
        GridFunction grad_d_;
        GridFunction x_;
        GridFunction d_;
    };

    Ray ray(const GridFunction& x, const GridFunction& d) const;

    /// W(x + t d) - W(x).
    double change(const GridFunction& x, const GridFunction& d, double t) const {
        return ray(x, d).change(t);
    }

private:
    Penalizer() = default;
    void require_input(const GridFunction& x) const;

    PenalizerKind kind_ = PenalizerKind::squared_norm;
    std::vector<PenaltyTerm> terms_;
    OperatorHandle tv_gradient_;
    double tv_weight_ = 0.0;
    double l1_weight_ = 0.0;
    double eps_ = 0.0;
    double multiplier_ = 1.0;
    bool strictly_convex_ = false;
    Shape input_{};
};

/// W(x) = sum_i weight_i |L_i x|^{q_i}. Strict convexity is recorded when all
/// q_i > 1 and some L_i is known injective; pass `verify_null_space` to decide
/// it instead from the dense spectrum of sum L_i^T L_i.
Penalizer make_weighted_sum(std::vector<PenaltyTerm> terms);
Penalizer make_weighted_sum(std::vector<PenaltyTerm> terms, bool verify_null_space);

/// Inputs needed to resolve penalizer specification strings.
struct PenalizerContext {
    Shape shape;
    std::optional<StructuralField> structural;
};

/// Parses "l2", "grad2", "seminorm:<op>:<q>", "tv[:<eps>]", "bv[:<eps>]" and
/// "sum:<alpha>*<op>^<q>(+<alpha>*<op>^<q>)*" with op in {id, grad, struct}.
/// Grammar errors raise ParseError with the character offset; "struct"
/// without a structural field raises ConfigurationError.
Penalizer parse_penalizer(std::string_view spec, const PenalizerContext& ctx);

/// True when the specification references the structural operator.
bool spec_uses_structural(std::string_view spec);

}  // namespace tikreg
