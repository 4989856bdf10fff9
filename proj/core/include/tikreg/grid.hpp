#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tikreg {

/// Extent of a grid function: pixels per row, rows, and values per pixel.
struct Shape {
    int width = 0;
    int height = 0;
    int channels = 1;

    std::size_t pixels() const noexcept { return static_cast<std::size_t>(width) * height; }
    std::size_t size() const noexcept { return pixels() * channels; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Throws DimensionError naming both shapes when they differ.
void require_same_shape(const Shape& a, const Shape& b, const char* context);

/// Real-valued function on a rectangular pixel grid.
///
/// Storage is row-major and channel-interleaved: the value of channel c at
/// row i, column j lives at ((i * width) + j) * channels + c. All entries are
/// finite; constructors reject NaN and infinity.
class GridFunction {
public:
    GridFunction() = default;

    /// Zero grid.
    explicit GridFunction(Shape shape);
    GridFunction(Shape shape, double fill);
    GridFunction(Shape shape, std::vector<double> values);

    static GridFunction zeros(int width, int height, int channels = 1);

    const Shape& shape() const noexcept { return shape_; }
    int width() const noexcept { return shape_.width; }
    int height() const noexcept { return shape_.height; }
    int channels() const noexcept { return shape_.channels; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double& operator[](std::size_t k) noexcept { return values_[k]; }

    double at(int row, int col, int channel = 0) const noexcept {
        return values_[index(row, col, channel)];
    }
    double& at(int row, int col, int channel = 0) noexcept {
        return values_[index(row, col, channel)];
    }

    std::size_t index(int row, int col, int channel = 0) const noexcept {
        return (static_cast<std::size_t>(row) * shape_.width + col) * shape_.channels + channel;
    }

    /// True when every entry is finite.
    bool all_finite() const noexcept;

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(double s) noexcept;

    /// this += s * other
    GridFunction& axpy(double s, const GridFunction& other);

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

    friend bool operator==(const GridFunction&, const GridFunction&) = default;

private:
    Shape shape_{};
    std::vector<double> values_;
};

double inner_product(const GridFunction& a, const GridFunction& b);
double norm_l2(const GridFunction& a);
double norm_linf(const GridFunction& a);

}  // namespace tikreg
