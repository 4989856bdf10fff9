#include "tikreg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "tikreg/errors.hpp"

namespace tikreg {

std::string to_string(const Shape& s) {
    return std::to_string(s.width) + "x" + std::to_string(s.height) + "x" +
           std::to_string(s.channels);
}

void require_same_shape(const Shape& a, const Shape& b, const char* context) {
    if (a != b) {
        throw DimensionError(std::string(context) + ": shape mismatch " + to_string(a) + " vs " +
                             to_string(b));
    }
}

namespace {

void validate_shape(const Shape& s) {
    if (s.width <= 0 || s.height <= 0 || s.channels <= 0) {
        throw ParameterError("grid shape must be positive, got " + to_string(s));
    }
}

}  // namespace

GridFunction::GridFunction(Shape shape) : GridFunction(shape, 0.0) {}

GridFunction::GridFunction(Shape shape, double fill) : shape_(shape) {
    validate_shape(shape_);
    if (!std::isfinite(fill)) throw ParameterError("grid fill value must be finite");
    values_.assign(shape_.size(), fill);
}

GridFunction::GridFunction(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
    validate_shape(shape_);
    if (values_.size() != shape_.size()) {
        throw DimensionError("grid of shape " + to_string(shape_) + " needs " +
                             std::to_string(shape_.size()) + " values, got " +
                             std::to_string(values_.size()));
    }
    if (!all_finite()) throw ParameterError("grid values must be finite");
}

GridFunction GridFunction::zeros(int width, int height, int channels) {
    return GridFunction(Shape{width, height, channels});
}

bool GridFunction::all_finite() const noexcept {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
    require_same_shape(shape_, other.shape_, "grid addition");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
    require_same_shape(shape_, other.shape_, "grid subtraction");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
    return *this;
}

GridFunction& GridFunction::operator*=(double s) noexcept {
    for (double& v : values_) v *= s;
    return *this;
}

GridFunction& GridFunction::axpy(double s, const GridFunction& other) {
    require_same_shape(shape_, other.shape_, "axpy");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * other.values_[k];
    return *this;
}

double inner_product(const GridFunction& a, const GridFunction& b) {
    require_same_shape(a.shape(), b.shape(), "inner_product");
    const auto av = a.values();
    const auto bv = b.values();
    double sum = 0.0;
    for (std::size_t k = 0; k < av.size(); ++k) sum += av[k] * bv[k];
    return sum;
}

double norm_l2(const GridFunction& a) {
    // Scaled accumulation so huge or tiny grids neither overflow nor underflow.
    const double scale = norm_linf(a);
    if (scale == 0.0) return 0.0;
    double sum = 0.0;
    for (double v : a.values()) {
        const double t = v / scale;
        sum += t * t;
    }
    return scale * std::sqrt(sum);
}

double norm_linf(const GridFunction& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace tikreg
