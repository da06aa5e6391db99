#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unidiff {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid grid, partition, or run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The quadratic form is not coercive: σ = 0 on a grid without Dirichlet nodes.
class CoercivityError : public Error {
public:
    using Error::Error;
};

/// Operand sizes disagree, or an input exceeds a hard size limit.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A hypothesis of a comparison/minorant check does not hold.
class PreconditionError : public Error {
public:
    PreconditionError(const std::string& what, std::size_t index)
        : Error(what), index_(index) {}

    /// First offending component.
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Malformed expression source. `position()` is 1-based.
class ExprSyntaxError : public Error {
public:
    ExprSyntaxError(const std::string& message, std::size_t position)
        : Error("syntax error at position " + std::to_string(position) + ": " + message),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class ExprEvalError : public Error {
public:
    using Error::Error;
};

} // namespace unidiff
