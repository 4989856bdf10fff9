#include "tikreg/penalizers.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <utility>

#include "tikreg/errors.hpp"

namespace tikreg {

std::string to_string(PenalizerKind kind) {
    switch (kind) {
        case PenalizerKind::squared_norm: return "squared_norm";
        case PenalizerKind::seminorm_power: return "seminorm_power";
        case PenalizerKind::weighted_sum: return "weighted_sum";
        case PenalizerKind::total_variation: return "total_variation";
        case PenalizerKind::bv_norm: return "bv_norm";
    }
    return "unknown";
}

namespace {

void validate_term(const PenaltyTerm& term) {
    if (!term.op.valid()) throw ParameterError("penalty term has no operator");
    if (!(term.weight > 0.0) || !std::isfinite(term.weight)) {
        throw ParameterError("penalty weight must be positive, got " + std::to_string(term.weight));
    }
    if (!(term.exponent >= 1.0) || !std::isfinite(term.exponent)) {
        throw ParameterError("penalty exponent must be >= 1, got " + std::to_string(term.exponent));
    }
}

// sqrt(s + eps^2) - eps without cancellation.
double smoothed_magnitude(double s, double eps) {
    if (s == 0.0) return 0.0;
    return s / (std::sqrt(s + eps * eps) + eps);
}

// sqrt(s + ds + eps^2) - sqrt(s + eps^2) without cancellation.
double smoothed_change(double s, double ds, double eps) {
    const double e2 = eps * eps;
    const double denom = std::sqrt(std::max(s + ds, 0.0) + e2) + std::sqrt(s + e2);
    return denom > 0.0 ? ds / denom : 0.0;
}

// a^{q/2} for a = |u|^2.
double power_of_square(double a, double q) {
    if (q == 2.0) return a;
    if (a == 0.0) return 0.0;
    return std::pow(a, 0.5 * q);
}

}  // namespace

Penalizer Penalizer::squared_norm(OperatorHandle op) {
    Penalizer w;
    w.kind_ = PenalizerKind::squared_norm;
    w.terms_.push_back(PenaltyTerm{1.0, std::move(op), 2.0});
    validate_term(w.terms_.front());
    w.input_ = w.terms_.front().op.input_shape();
    w.strictly_convex_ = w.terms_.front().op.known_injective();
    return w;
}

Penalizer Penalizer::seminorm_power(OperatorHandle op, double exponent) {
    Penalizer w;
    w.kind_ = PenalizerKind::seminorm_power;
    w.terms_.push_back(PenaltyTerm{1.0, std::move(op), exponent});
    validate_term(w.terms_.front());
    w.input_ = w.terms_.front().op.input_shape();
    w.strictly_convex_ = exponent > 1.0 && w.terms_.front().op.known_injective();
    return w;
}

Penalizer Penalizer::total_variation(int width, int height, double eps) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw ParameterError("TV smoothing must be >= 0");
    Penalizer w;
    w.kind_ = PenalizerKind::total_variation;
    w.tv_gradient_ = detail::make_forward_differences(width, height);
    w.tv_weight_ = 1.0;
    w.eps_ = eps;
    w.input_ = w.tv_gradient_.input_shape();
    return w;
}

Penalizer Penalizer::bv_norm(int width, int height, double eps) {
    Penalizer w = total_variation(width, height, eps);
    w.kind_ = PenalizerKind::bv_norm;
    w.l1_weight_ = 1.0;
    return w;
}

Penalizer make_weighted_sum(std::vector<PenaltyTerm> terms, bool verify_null_space) {
    if (terms.empty()) throw ParameterError("weighted sum needs at least one term");
    Penalizer w;
    w.kind_ = PenalizerKind::weighted_sum;
    w.input_ = terms.front().op.valid() ? terms.front().op.input_shape() : Shape{};
    bool all_strict_powers = true;
    bool some_injective = false;
    for (const auto& t : terms) {
        validate_term(t);
        require_same_shape(t.op.input_shape(), w.input_, "weighted sum term");
        all_strict_powers = all_strict_powers && t.exponent > 1.0;
        some_injective = some_injective || t.op.known_injective();
    }
    w.terms_ = std::move(terms);
    if (!all_strict_powers) {
        w.strictly_convex_ = false;
    } else if (verify_null_space && !some_injective) {
        std::vector<OperatorHandle> ops;
        for (const auto& t : w.terms_) ops.push_back(t.op);
        w.strictly_convex_ = min_eigenvalue_of_normal_sum(ops) > 1e-12;
    } else {
        w.strictly_convex_ = some_injective;
    }
    return w;
}

Penalizer make_weighted_sum(std::vector<PenaltyTerm> terms) {
    return make_weighted_sum(std::move(terms), false);
}

Penalizer Penalizer::scaled(double alpha) const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ParameterError("penalizer scale must be positive, got " + std::to_string(alpha));
    }
    Penalizer w = *this;
    w.multiplier_ *= alpha;
    return w;
}

bool Penalizer::is_quadratic() const noexcept {
    if (kind_ == PenalizerKind::total_variation || kind_ == PenalizerKind::bv_norm) return false;
    for (const auto& t : terms_) {
        if (t.exponent != 2.0) return false;
    }
    return true;
}

bool Penalizer::is_differentiable() const noexcept {
    if (kind_ == PenalizerKind::total_variation || kind_ == PenalizerKind::bv_norm) return eps_ > 0.0;
    return true;
}

std::vector<std::pair<double, OperatorHandle>> Penalizer::quadratic_terms() const {
    if (!is_quadratic()) {
        throw ConfigurationError("penalizer of kind " + to_string(kind_) +
                                 " is not quadratic; use solve_general");
    }
    std::vector<std::pair<double, OperatorHandle>> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) out.emplace_back(multiplier_ * t.weight, t.op);
    return out;
}

void Penalizer::require_input(const GridFunction& x) const {
    require_same_shape(x.shape(), input_, "penalizer");
}

double Penalizer::value(const GridFunction& x) const {
    require_input(x);
    double total = 0.0;
    for (const auto& t : terms_) {
        const auto lx = t.op.apply(x);
        total += t.weight * power_of_square(inner_product(lx, lx), t.exponent);
    }
    if (tv_weight_ > 0.0) {
        const auto g = tv_gradient_.apply(x);
        double tv = 0.0;
        for (std::size_t p = 0; p < g.shape().pixels(); ++p) {
            tv += smoothed_magnitude(g[2 * p] * g[2 * p] + g[2 * p + 1] * g[2 * p + 1], eps_);
        }
        total += tv_weight_ * tv;
    }
    if (l1_weight_ > 0.0) {
        double l1 = 0.0;
        for (double v : x.values()) l1 += smoothed_magnitude(v * v, eps_);
        total += l1_weight_ * l1;
    }
    return multiplier_ * total;
}

GridFunction Penalizer::gradient(const GridFunction& x) const {
    require_input(x);
    if (!is_differentiable()) {
        throw ConfigurationError("gradient of " + to_string(kind_) +
                                 " requires smoothing eps > 0 (got eps = 0)");
    }
    GridFunction grad(input_);
    for (const auto& t : terms_) {
        const auto lx = t.op.apply(x);
        const double sq = inner_product(lx, lx);
        // Zero is the minimal-norm subgradient at Lx = 0 for every q >= 1.
        if (sq == 0.0) continue;
        const double factor =
            t.exponent == 2.0 ? 2.0 : t.exponent * std::pow(sq, 0.5 * t.exponent - 1.0);
        grad.axpy(t.weight * factor, t.op.apply_adjoint(lx));
    }
    if (tv_weight_ > 0.0) {
        auto g = tv_gradient_.apply(x);
        for (std::size_t p = 0; p < g.shape().pixels(); ++p) {
            const double s = g[2 * p] * g[2 * p] + g[2 * p + 1] * g[2 * p + 1];
            const double inv = 1.0 / std::sqrt(s + eps_ * eps_);
            g[2 * p] *= inv;
            g[2 * p + 1] *= inv;
        }
        grad.axpy(tv_weight_, tv_gradient_.apply_adjoint(g));
    }
    if (l1_weight_ > 0.0) {
        const auto xv = x.values();
        auto gv = grad.values();
        for (std::size_t k = 0; k < xv.size(); ++k) {
            gv[k] += l1_weight_ * xv[k] / std::sqrt(xv[k] * xv[k] + eps_ * eps_);
        }
    }
    grad *= multiplier_;
    return grad;
}

Penalizer::Ray Penalizer::ray(const GridFunction& x, const GridFunction& d) const {
    require_input(x);
    require_input(d);
    Ray r;
    for (const auto& t : terms_) {
        const auto lx = t.op.apply(x);
        const auto ld = t.op.apply(d);
        r.powers_.push_back(Ray::Power{multiplier_ * t.weight, t.exponent, inner_product(lx, lx),
                                       inner_product(lx, ld), inner_product(ld, ld)});
    }
    r.eps_ = eps_;
    if (tv_weight_ > 0.0) {
        r.tv_weight_ = multiplier_ * tv_weight_;
        r.grad_x_ = tv_gradient_.apply(x);
        r.grad_d_ = tv_gradient_.apply(d);
    }
    if (l1_weight_ > 0.0) {
        r.l1_weight_ = multiplier_ * l1_weight_;
        r.x_ = x;
        r.d_ = d;
    }
    return r;
}

double Penalizer::Ray::change(double t) const {
    double total = 0.0;
    for (const auto& p : powers_) {
        const double da = t * (2.0 * p.cross + t * p.dir_sq);
        if (p.exponent == 2.0) {
            total += p.weight * da;
        } else if (p.base_sq == 0.0) {
            total += p.weight * power_of_square(std::max(da, 0.0), p.exponent);
        } else {
            const double rel = std::max(da / p.base_sq, -1.0);
            total += p.weight * std::pow(p.base_sq, 0.5 * p.exponent) *
                     std::expm1(0.5 * p.exponent * std::log1p(rel));
        }
    }
    if (tv_weight_ > 0.0) {
        double tv = 0.0;
        for (std::size_t q = 0; q < grad_x_.shape().pixels(); ++q) {
            const double gx = grad_x_[2 * q];
            const double gy = grad_x_[2 * q + 1];
            const double hx = grad_d_[2 * q];
            const double hy = grad_d_[2 * q + 1];
            const double s = gx * gx + gy * gy;
            const double ds = t * (2.0 * (gx * hx + gy * hy) + t * (hx * hx + hy * hy));
            tv += smoothed_change(s, ds, eps_);
        }
        total += tv_weight_ * tv;
    }
    if (l1_weight_ > 0.0) {
        double l1 = 0.0;
        for (std::size_t k = 0; k < x_.size(); ++k) {
            const double a = x_[k];
            const double b = d_[k];
            l1 += smoothed_change(a * a, t * (2.0 * a * b + t * b * b), eps_);
        }
        total += l1_weight_ * l1;
    }
    return total;
}

// Specification strings --------------------------------------------------------

namespace {

class SpecParser {
public:
    SpecParser(std::string_view spec, const PenalizerContext& ctx) : spec_(spec), ctx_(ctx) {}

    Penalizer parse() {
        if (spec_ == "l2") return Penalizer::squared_norm(make_identity(scalar()));
        if (spec_ == "grad2") return Penalizer::squared_norm(make_op("grad", 0));
        if (spec_ == "tv") return Penalizer::total_variation(ctx_.shape.width, ctx_.shape.height);
        if (spec_ == "bv") return Penalizer::bv_norm(ctx_.shape.width, ctx_.shape.height);
        if (consume("tv:")) {
            const double eps = number("eps");
            finish();
            return Penalizer::total_variation(ctx_.shape.width, ctx_.shape.height, eps);
        }
        if (consume("bv:")) {
            const double eps = number("eps");
            finish();
            return Penalizer::bv_norm(ctx_.shape.width, ctx_.shape.height, eps);
        }
        if (consume("seminorm:")) {
            const std::size_t at = pos_;
            auto op = make_op(identifier(), at);
            expect(':');
            const double q = number("exponent");
            finish();
            return Penalizer::seminorm_power(std::move(op), q);
        }
        if (consume("sum:")) {
            std::vector<PenaltyTerm> terms;
            do {
                PenaltyTerm t;
                t.weight = number("weight");
                expect('*');
                const std::size_t at = pos_;
                t.op = make_op(identifier(), at);
                expect('^');
                t.exponent = number("exponent");
                terms.push_back(std::move(t));
            } while (consume("+"));
            finish();
            return make_weighted_sum(std::move(terms));
        }
        throw ParseError("unknown penalizer specification '" + std::string(spec_) + "'", 0);
    }

private:
    Shape scalar() const { return Shape{ctx_.shape.width, ctx_.shape.height, 1}; }

    OperatorHandle make_op(std::string_view name, std::size_t at) const {
        if (name == "id") return make_identity(scalar());
        if (name == "grad") return make_gradient(ctx_.shape.width, ctx_.shape.height);
        if (name == "struct") {
            if (!ctx_.structural) {
                throw ConfigurationError("penalizer '" + std::string(spec_) +
                                         "' uses the structural operator but no gamma image was given");
            }
            require_same_shape(ctx_.structural->gamma.shape(), scalar(), "structural gamma");
            return make_structural(*ctx_.structural);
        }
        throw ParseError("unknown operator '" + std::string(name) + "'", at);
    }

    bool consume(std::string_view token) {
        if (spec_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (pos_ >= spec_.size() || spec_[pos_] != c) {
            throw ParseError(std::string("expected '") + c + "' in penalizer specification", pos_);
        }
        ++pos_;
    }

    std::string_view identifier() {
        const std::size_t start = pos_;
        while (pos_ < spec_.size() && std::isalpha(static_cast<unsigned char>(spec_[pos_]))) ++pos_;
        if (pos_ == start) throw ParseError("expected operator name", start);
        return spec_.substr(start, pos_ - start);
    }

    double number(const char* what) {
        double value = 0.0;
        const char* first = spec_.data() + pos_;
        const char* last = spec_.data() + spec_.size();
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || !std::isfinite(value)) {
            throw ParseError(std::string("expected ") + what + " in penalizer specification", pos_);
        }
        pos_ += static_cast<std::size_t>(ptr - first);
        return value;
    }

    void finish() const {
        if (pos_ != spec_.size()) throw ParseError("trailing characters in penalizer specification", pos_);
    }

    std::string_view spec_;
    const PenalizerContext& ctx_;
    std::size_t pos_ = 0;
};

}  // namespace

Penalizer parse_penalizer(std::string_view spec, const PenalizerContext& ctx) {
    return SpecParser(spec, ctx).parse();
}

bool spec_uses_structural(std::string_view spec) { return spec.find("struct") != std::string_view::npos; }

}  // namespace tikreg
