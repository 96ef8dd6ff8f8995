#pragma once
#include <stdexcept>
#include <string>

namespace cpcp {

// Violated preconditions (bad dimensions, parameters out of range,
// degenerate ensembles, refused configurations). CLI maps these to exit 2.
struct PreconditionError : std::invalid_argument {
    explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

// File/stream failures. CLI maps these to exit 1.
struct IOError : std::runtime_error {
    explicit IOError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative schemes that fail to settle (power iteration on a near-degenerate
// spectrum, divergent Neumann series).
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cpcp
