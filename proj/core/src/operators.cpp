#include "tikreg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "tikreg/errors.hpp"

namespace tikreg {

std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::identity: return "identity";
        case OperatorKind::gaussian_blur: return "gaussian_blur";
        case OperatorKind::gradient: return "gradient";
        case OperatorKind::structural: return "structural";
        case OperatorKind::dense: return "dense";
    }
    return "unknown";
}

OperatorHandle::OperatorHandle(std::shared_ptr<const detail::OperatorImpl> impl)
    : impl_(std::move(impl)) {}

const detail::OperatorImpl& OperatorHandle::impl() const {
    if (!impl_) throw ParameterError("use of an empty operator handle");
    return *impl_;
}

OperatorKind OperatorHandle::kind() const { return impl().kind(); }
const Shape& OperatorHandle::input_shape() const { return impl().input_shape(); }
const Shape& OperatorHandle::output_shape() const { return impl().output_shape(); }
bool OperatorHandle::known_injective() const { return impl().known_injective(); }

GridFunction OperatorHandle::apply(const GridFunction& x) const {
    const auto& op = impl();
    require_same_shape(x.shape(), op.input_shape(), "operator apply");
    GridFunction out(op.output_shape());
    op.apply(x, out);
    return out;
}

GridFunction OperatorHandle::apply_adjoint(const GridFunction& y) const {
    const auto& op = impl();
    require_same_shape(y.shape(), op.output_shape(), "operator apply_adjoint");
    GridFunction out(op.input_shape());
    op.apply_adjoint(y, out);
    return out;
}

namespace {

Shape scalar_shape(int width, int height) { return Shape{width, height, 1}; }
Shape field_shape(int width, int height) { return Shape{width, height, 2}; }

class IdentityOperator final : public detail::OperatorImpl {
public:
    explicit IdentityOperator(Shape s) : OperatorImpl(OperatorKind::identity, s, s) {}

    void apply(const GridFunction& x, GridFunction& out) const override { out = x; }
    void apply_adjoint(const GridFunction& y, GridFunction& out) const override { out = y; }
    bool known_injective() const override { return true; }
};

// Maps any integer index into [0, n) by half-sample symmetric reflection
// (..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...).
int reflect(int idx, int n) {
    const int period = 2 * n;
    int m = idx % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

std::vector<double> normalized_profile(double kappa, int radius) {
    std::vector<double> w(2 * radius + 1);
    double sum = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        w[d + radius] = std::exp(-kappa * d * d);
        sum += w[d + radius];
    }
    for (double& v : w) v /= sum;
    return w;
}

class GaussianBlur final : public detail::OperatorImpl {
public:
    GaussianBlur(int width, int height, double kappa, int radius)
        : OperatorImpl(OperatorKind::gaussian_blur, scalar_shape(width, height),
                       scalar_shape(width, height)),
          radius_(radius),
          profile_(normalized_profile(kappa, radius)) {}

    // The 2D stencil is the outer product of `profile_` with itself, so the
    // blur runs as a row pass followed by a column pass. Reflected indices are
    // tabulated once per call; the column pass accumulates whole rows.
    void apply(const GridFunction& x, GridFunction& out) const override {
        const int w = x.width();
        const int h = x.height();
        const int taps = 2 * radius_ + 1;
        const auto cols = reflected_indices(w);
        std::vector<double> rows(x.size());
        const double* src = x.values().data();
        for (int i = 0; i < h; ++i) {
            const double* in = src + static_cast<std::size_t>(i) * w;
            double* dst = rows.data() + static_cast<std::size_t>(i) * w;
            for (int j = 0; j < w; ++j) {
                const int* idx = cols.data() + static_cast<std::size_t>(j) * taps;
                double acc = 0.0;
                for (int t = 0; t < taps; ++t) acc += profile_[t] * in[idx[t]];
                dst[j] = acc;
            }
        }
        const auto rws = reflected_indices(h);
        double* dst = out.values().data();
        for (int i = 0; i < h; ++i) {
            double* line = dst + static_cast<std::size_t>(i) * w;
            std::fill(line, line + w, 0.0);
            const int* idx = rws.data() + static_cast<std::size_t>(i) * taps;
            for (int t = 0; t < taps; ++t) {
                const double c = profile_[t];
                const double* in = rows.data() + static_cast<std::size_t>(idx[t]) * w;
                for (int j = 0; j < w; ++j) line[j] += c * in[j];
            }
        }
    }

    void apply_adjoint(const GridFunction& y, GridFunction& out) const override { apply(y, out); }

    // Row sums are one and the diagonal is at least the center weight, so a
    // center weight above 1/2 makes each 1D factor strictly diagonally dominant.
    bool known_injective() const override { return profile_[radius_] > 0.5; }

private:
    // Entry [k * taps + t] is the reflected index of k + t - radius.
    std::vector<int> reflected_indices(int n) const {
        const int taps = 2 * radius_ + 1;
        std::vector<int> idx(static_cast<std::size_t>(n) * taps);
        for (int k = 0; k < n; ++k)
            for (int t = 0; t < taps; ++t) idx[static_cast<std::size_t>(k) * taps + t] = reflect(k + t - radius_, n);
        return idx;
    }

    int radius_;
    std::vector<double> profile_;
};

void forward_gradient(const GridFunction& f, GridFunction& out) {
    const int w = f.width();
    const int h = f.height();
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double v = f.at(i, j);
            out.at(i, j, 0) = j + 1 < w ? f.at(i, j + 1) - v : 0.0;
            out.at(i, j, 1) = i + 1 < h ? f.at(i + 1, j) - v : 0.0;
        }
    }
}

// Negative divergence, the exact adjoint of forward_gradient.
void gradient_adjoint(const GridFunction& g, GridFunction& out) {
    const int w = g.width();
    const int h = g.height();
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            if (j + 1 < w) acc -= g.at(i, j, 0);
            if (j >= 1) acc += g.at(i, j - 1, 0);
            if (i + 1 < h) acc -= g.at(i, j, 1);
            if (i >= 1) acc += g.at(i - 1, j, 1);
            out.at(i, j) = acc;
        }
    }
}

class Gradient final : public detail::OperatorImpl {
public:
    Gradient(int width, int height)
        : OperatorImpl(OperatorKind::gradient, scalar_shape(width, height),
                       field_shape(width, height)) {}

    void apply(const GridFunction& x, GridFunction& out) const override { forward_gradient(x, out); }
    void apply_adjoint(const GridFunction& y, GridFunction& out) const override {
        gradient_adjoint(y, out);
    }
    bool known_injective() const override { return false; }
};

class Structural final : public detail::OperatorImpl {
public:
    Structural(const StructuralField& field)
        : OperatorImpl(OperatorKind::structural, scalar_shape(field.gamma.width(), field.gamma.height()),
                       field_shape(field.gamma.width(), field.gamma.height())) {
        GridFunction grad(output_shape());
        forward_gradient(field.gamma, grad);
        matrices_.reserve(grad.shape().pixels());
        for (std::size_t p = 0; p < grad.shape().pixels(); ++p) {
            matrices_.push_back(structural_matrix(grad[2 * p], grad[2 * p + 1], field.c));
        }
    }

    void apply(const GridFunction& x, GridFunction& out) const override {
        forward_gradient(x, out);
        transform(out);
    }

    void apply_adjoint(const GridFunction& y, GridFunction& out) const override {
        GridFunction weighted = y;
        transform(weighted);  // A is symmetric
        gradient_adjoint(weighted, out);
    }

    bool known_injective() const override { return false; }

private:
    void transform(GridFunction& field) const {
        for (std::size_t p = 0; p < matrices_.size(); ++p) {
            const auto& a = matrices_[p];
            const double gx = field[2 * p];
            const double gy = field[2 * p + 1];
            field[2 * p] = a.a11 * gx + a.a12 * gy;
            field[2 * p + 1] = a.a12 * gx + a.a22 * gy;
        }
    }

    std::vector<StructuralMatrix> matrices_;
};

class Dense final : public detail::OperatorImpl {
public:
    Dense(Eigen::MatrixXd m, Shape in, Shape out)
        : OperatorImpl(OperatorKind::dense, in, out), matrix_(std::move(m)) {
        injective_ = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(matrix_).rank() == matrix_.cols();
    }

    void apply(const GridFunction& x, GridFunction& out) const override {
        out = from_vector(matrix_ * to_vector(x), output_shape());
    }
    void apply_adjoint(const GridFunction& y, GridFunction& out) const override {
        out = from_vector(matrix_.transpose() * to_vector(y), input_shape());
    }
    bool known_injective() const override { return injective_; }

private:
    Eigen::MatrixXd matrix_;
    bool injective_ = false;
};

}  // namespace

double psf_weight(double kappa, int dx, int dy) {
    return kappa / std::numbers::pi * std::exp(-kappa * (dx * dx + dy * dy));
}

std::vector<double> gaussian_stencil(double kappa, int radius) {
    if (!(kappa > 0.0) || radius < 1) {
        throw ParameterError("gaussian stencil needs kappa > 0 and radius >= 1");
    }
    const auto profile = normalized_profile(kappa, radius);
    const int n = 2 * radius + 1;
    std::vector<double> stencil(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) stencil[a * n + b] = profile[a] * profile[b];
    }
    return stencil;
}

double discarded_tail_mass(double kappa, int radius) {
    if (!(kappa > 0.0) || radius < 0) throw ParameterError("tail mass needs kappa > 0, radius >= 0");
    // 1D sums until terms underflow; the 2D mass factorizes.
    double inner = 0.0;
    double total = 0.0;
    for (int d = 0;; ++d) {
        const double t = std::exp(-kappa * d * d) * (d == 0 ? 1.0 : 2.0);
        if (d <= radius) inner += t;
        total += t;
        if (d > radius && t < 1e-300) break;
    }
    const double kept = inner / total;
    return 1.0 - kept * kept;
}

OperatorHandle make_identity(Shape shape) {
    if (shape.width <= 0 || shape.height <= 0 || shape.channels <= 0) {
        throw ParameterError("identity operator needs a positive shape");
    }
    return OperatorHandle(std::make_shared<IdentityOperator>(shape));
}

OperatorHandle make_gaussian_blur(int width, int height, double kappa, int radius) {
    if (width <= 0 || height <= 0) throw ParameterError("blur grid must be nonempty");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ParameterError("blur kappa must be positive");
    if (radius < 1) throw ParameterError("blur radius must be at least 1");
    return OperatorHandle(std::make_shared<GaussianBlur>(width, height, kappa, radius));
}

OperatorHandle make_gradient(int width, int height) {
    if (width < 2 || height < 2) {
        throw ParameterError("gradient needs a grid of at least 2x2, got " + std::to_string(width) +
                             "x" + std::to_string(height));
    }
    return OperatorHandle(std::make_shared<Gradient>(width, height));
}

OperatorHandle detail::make_forward_differences(int width, int height) {
    if (width < 1 || height < 1) throw ParameterError("empty grid");
    return OperatorHandle(std::make_shared<Gradient>(width, height));
}

StructuralMatrix structural_matrix(double gx, double gy, double c) {
    const double s = 1.0 / (1.0 + c * (gx * gx + gy * gy));
    return StructuralMatrix{1.0 - s * gx * gx, -s * gx * gy, 1.0 - s * gy * gy};
}

OperatorHandle make_structural(const StructuralField& field) {
    if (field.gamma.channels() != 1) {
        throw DimensionError("structural gamma must be single-channel, got " +
                             to_string(field.gamma.shape()));
    }
    if (!(field.c > 0.0) || !std::isfinite(field.c)) throw ParameterError("structural c must be positive");
    if (field.gamma.width() < 2 || field.gamma.height() < 2) {
        throw ParameterError("structural operator needs a grid of at least 2x2");
    }
    return OperatorHandle(std::make_shared<Structural>(field));
}

OperatorHandle make_dense(Eigen::MatrixXd matrix, Shape input_shape, Shape output_shape) {
    if (static_cast<std::size_t>(matrix.cols()) != input_shape.size() ||
        static_cast<std::size_t>(matrix.rows()) != output_shape.size()) {
        throw DimensionError("dense matrix " + std::to_string(matrix.rows()) + "x" +
                             std::to_string(matrix.cols()) + " does not map " +
                             to_string(input_shape) + " to " + to_string(output_shape));
    }
    if (!matrix.allFinite()) throw ParameterError("dense operator entries must be finite");
    return OperatorHandle(std::make_shared<Dense>(std::move(matrix), input_shape, output_shape));
}

Eigen::MatrixXd assemble_dense(const OperatorHandle& op, std::size_t cap) {
    const std::size_t n = op.input_shape().size();
    if (n > cap) {
        throw CapacityError("dense assembly of " + std::to_string(n) + " unknowns refused", cap);
    }
    const std::size_t m = op.output_shape().size();
    Eigen::MatrixXd matrix(m, n);
    GridFunction unit(op.input_shape());
    for (std::size_t j = 0; j < n; ++j) {
        unit[j] = 1.0;
        const auto column = op.apply(unit);
        for (std::size_t i = 0; i < m; ++i) matrix(i, j) = column[i];
        unit[j] = 0.0;
    }
    return matrix;
}

double min_eigenvalue_of_normal_sum(const std::vector<OperatorHandle>& ops, std::size_t cap) {
    if (ops.empty()) throw ParameterError("normal sum needs at least one operator");
    const Shape& in = ops.front().input_shape();
    const auto n = static_cast<Eigen::Index>(in.size());
    if (in.size() > cap) throw CapacityError("normal-sum eigen-solve refused", cap);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    for (const auto& op : ops) {
        require_same_shape(op.input_shape(), in, "normal sum");
        const Eigen::MatrixXd a = assemble_dense(op, cap);
        gram.noalias() += a.transpose() * a;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

Eigen::VectorXd to_vector(const GridFunction& f) {
    const auto v = f.values();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

GridFunction from_vector(const Eigen::VectorXd& v, Shape shape) {
    return GridFunction(shape, std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace tikreg
