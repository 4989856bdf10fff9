#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace tikreg {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of two operands disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument violates a documented precondition (sizes, signs, ranges).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed input text or bytes; carries the byte offset of the problem.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// A dense assembly or factorization was refused because it exceeds the size cap.
class CapacityError : public Error {
public:
    CapacityError(const std::string& what, std::size_t cap)
        : Error(what + " (cap " + std::to_string(cap) + " unknowns)"), cap_(cap) {}

    std::size_t cap() const noexcept { return cap_; }

private:
    std::size_t cap_;
};

/// The requested combination of penalizer/solver/shape is not supported.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Base for failures of an iterative or direct numerical method.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A system that must be positive definite is not (CG curvature, Cholesky).
class DefinitenessError : public NumericalError {
public:
    DefinitenessError(const std::string& what, double rayleigh_quotient)
        : NumericalError(what), rayleigh_quotient_(rayleigh_quotient) {}

    double rayleigh_quotient() const noexcept { return rayleigh_quotient_; }

private:
    double rayleigh_quotient_;
};

/// Backtracking could not find a decreasing step.
class StagnationError : public NumericalError {
public:
    StagnationError(const std::string& what, int iteration, double gradient_norm)
        : NumericalError(what), iteration_(iteration), gradient_norm_(gradient_norm) {}

    int iteration() const noexcept { return iteration_; }
    double gradient_norm() const noexcept { return gradient_norm_; }

private:
    int iteration_;
    double gradient_norm_;
};

/// The L-curve has no convex corner (collinear or concave points).
class NoCornerError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Too few usable points survived an L-curve sweep.
class SweepError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Invalid pipeline configuration (unknown key, bad value, missing input).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; wraps the underlying error with the stage name.
class StageError : public Error {
public:
    enum class Cause { config, numerical, other };

    StageError(std::string stage, Cause cause, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)), cause_(cause) {}

    const std::string& stage() const noexcept { return stage_; }
    Cause cause() const noexcept { return cause_; }

private:
    std::string stage_;
    Cause cause_;
};

}  // namespace tikreg
