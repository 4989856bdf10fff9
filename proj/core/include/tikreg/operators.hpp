#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tikreg/grid.hpp"

namespace tikreg {

enum class OperatorKind { identity, gaussian_blur, gradient, structural, dense };

std::string to_string(OperatorKind kind);

/// Default ceiling on the number of unknowns for dense assembly.
inline constexpr std::size_t kDenseCap = 4096;

namespace detail {

class OperatorImpl {
public:
    OperatorImpl(OperatorKind kind, Shape in, Shape out) : kind_(kind), in_(in), out_(out) {}
    virtual ~OperatorImpl() = default;

    OperatorKind kind() const noexcept { return kind_; }
    const Shape& input_shape() const noexcept { return in_; }
    const Shape& output_shape() const noexcept { return out_; }

    // Inputs are shape-checked by the handle; `out` arrives sized and zeroed.
    virtual void apply(const GridFunction& x, GridFunction& out) const = 0;
    virtual void apply_adjoint(const GridFunction& y, GridFunction& out) const = 0;
    virtual bool known_injective() const = 0;

private:
    OperatorKind kind_;
    Shape in_;
    Shape out_;
};

}  // namespace detail

/// Immutable linear map between grid spaces with its adjoint.
///
/// Handles are cheap to copy and share one implementation; apply and
/// apply_adjoint are const and reentrant.
class OperatorHandle {
public:
    OperatorHandle() = default;
    explicit OperatorHandle(std::shared_ptr<const detail::OperatorImpl> impl);

    bool valid() const noexcept { return static_cast<bool>(impl_); }
    OperatorKind kind() const;
    const Shape& input_shape() const;
    const Shape& output_shape() const;

    GridFunction apply(const GridFunction& x) const;
    GridFunction apply_adjoint(const GridFunction& y) const;

    /// True only when injectivity is certain: identity, a diagonally dominant
    /// blur, or a dense matrix of full column rank.
    bool known_injective() const;

private:
    const detail::OperatorImpl& impl() const;

    std::shared_ptr<const detail::OperatorImpl> impl_;
};

inline GridFunction apply(const OperatorHandle& op, const GridFunction& x) { return op.apply(x); }
inline GridFunction apply_adjoint(const OperatorHandle& op, const GridFunction& y) {
    return op.apply_adjoint(y);
}

/// Unnormalized point spread function (kappa / pi) * exp(-kappa * (dx^2 + dy^2)).
double psf_weight(double kappa, int dx, int dy);

/// Normalized (2r+1) x (2r+1) stencil, row-major with dy outer; sums to one.
std::vector<double> gaussian_stencil(double kappa, int radius);

/// Fraction of the untruncated discrete PSF mass lying outside |dx|,|dy| <= radius.
double discarded_tail_mass(double kappa, int radius);

namespace detail {
// make_gradient without the 2x2 minimum; single rows or columns get a zero channel.
OperatorHandle make_forward_differences(int width, int height);
}  // namespace detail

OperatorHandle make_identity(Shape shape);

/// Truncated Gaussian convolution on a single-channel width x height grid with
/// half-sample reflective boundaries. Symmetric, so it is its own adjoint.
OperatorHandle make_gaussian_blur(int width, int height, double kappa, int radius);

/// Forward differences with a zero row/column at the far edge. Output has two
/// channels: channel 0 is the column difference, channel 1 the row difference.
OperatorHandle make_gradient(int width, int height);

struct StructuralField {
    GridFunction gamma;
    double c = 5.0;
};

/// Per-pixel 2x2 matrix A = I - (1 + c|g|^2)^{-1} g g^T with g = grad(gamma).
struct StructuralMatrix {
    double a11;
    double a12;
    double a22;
};

StructuralMatrix structural_matrix(double gx, double gy, double c);

/// L f = A(x) grad f, pixelwise, with A built from grad(gamma).
OperatorHandle make_structural(const StructuralField& field);

/// Wraps an explicit matrix acting on flattened grids.
OperatorHandle make_dense(Eigen::MatrixXd matrix, Shape input_shape, Shape output_shape);

/// Column j equals apply(op, e_j). Refuses inputs with more than `cap` unknowns.
Eigen::MatrixXd assemble_dense(const OperatorHandle& op, std::size_t cap = kDenseCap);

/// Smallest eigenvalue of the dense sum of A_i^T A_i over `ops`, which must all
/// share one input shape. This is the largest k with sum |A_i x|^2 >= k |x|^2.
double min_eigenvalue_of_normal_sum(const std::vector<OperatorHandle>& ops,
                                    std::size_t cap = kDenseCap);

/// Flattened views between grids and Eigen vectors.
Eigen::VectorXd to_vector(const GridFunction& f);
GridFunction from_vector(const Eigen::VectorXd& v, Shape shape);

}  // namespace tikreg
