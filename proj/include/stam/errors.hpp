#pragma once

#include <stdexcept>
#include <string>

namespace stam {

// Operand shapes or dimensionalities do not agree.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A value lies outside an operation's documented domain (bad label,
// empty input, missing gradient, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// An experiment or task configuration is invalid or inconsistent.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A non-finite value was produced where finite math was expected.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A file could not be read, written, or parsed.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace stam
