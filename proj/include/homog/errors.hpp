#pragma once

#include <stdexcept>
#include <string>

namespace homog {

// Two failure families, matching the CLI exit-code contract:
// ValidationError (bad inputs, exit 1) and NumericalError (a computation
// that started but could not certify its result, exit 2).

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : ValidationError {
    explicit ConfigError(const std::string& msg) : ValidationError(msg) {}
};

struct GridMismatch : ValidationError {
    explicit GridMismatch(const std::string& msg) : ValidationError(msg) {}
};

struct NonConvergent : NumericalError {
    explicit NonConvergent(const std::string& msg) : NumericalError(msg) {}
};

// Extraction ran through its whole order schedule without the successive
// sup-grid deviations dropping below tolerance.
struct NoConvergence : NumericalError {
    explicit NoConvergence(const std::string& msg) : NumericalError(msg) {}
};

struct QuadratureError : NumericalError {
    explicit QuadratureError(const std::string& msg) : NumericalError(msg) {}
};

struct ErgodicityViolation : NumericalError {
    explicit ErgodicityViolation(const std::string& msg) : NumericalError(msg) {}
};

struct EllipticityViolation : NumericalError {
    explicit EllipticityViolation(const std::string& msg) : NumericalError(msg) {}
};

struct ModulusViolation : NumericalError {
    explicit ModulusViolation(const std::string& msg) : NumericalError(msg) {}
};

struct NonMonotoneDecomposition : NumericalError {
    explicit NonMonotoneDecomposition(const std::string& msg) : NumericalError(msg) {}
};

struct TableRangeExceeded : NumericalError {
    explicit TableRangeExceeded(const std::string& msg) : NumericalError(msg) {}
};

} // namespace homog
