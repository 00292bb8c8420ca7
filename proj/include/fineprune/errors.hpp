#pragma once

#include <stdexcept>
#include <string>

namespace fp {

// Mismatched tensor/layer dimensions.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid argument values (out-of-range parameters, bad sizes).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Non-finite values encountered during computation. layer_index is -1 when
// the failure is not attributable to a specific layer.
struct NumericError : std::runtime_error {
    int layer_index;
    explicit NumericError(const std::string& msg, int layer = -1)
        : std::runtime_error(msg), layer_index(layer) {}
};

// Matrix factorization failed even after jitter escalation.
struct ConditioningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation called on an object in the wrong state.
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

// Malformed input files (CSV, checkpoints, configs).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config keys/values rejected during validation.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fp
