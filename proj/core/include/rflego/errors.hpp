#pragma once

#include <stdexcept>
#include <string>

namespace rflego {

/// Base of every error thrown by the library. `kind()` is a stable
/// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Shapes or lengths that do not fit the operation.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

/// Non-finite values, singular systems, divergence.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

/// Requested operation is outside what the component supports.
class CapabilityError : public Error {
public:
    explicit CapabilityError(const std::string& what) : Error("capability", what) {}
};

/// Input data violates a precondition (empty targets, too few samples, ...).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error("data", what) {}
};

/// A stored artifact or configuration failed validation on load.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error("validation", what) {}
};

}  // namespace rflego
