#pragma once

#include <stdexcept>
#include <string>

namespace proxmsm {

// Bad inputs: shapes, roles, supports, malformed files. CLI maps these to exit 1.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Data-dependent numerical failure: singular systems, solver non-convergence,
// unstable weights. CLI maps these to exit 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace proxmsm
