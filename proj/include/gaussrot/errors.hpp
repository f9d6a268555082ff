#pragma once

#include <stdexcept>
#include <string>

namespace gaussrot {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a matrix inversion is requested for a (numerically) singular matrix.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(const std::string& what, double det_magnitude)
        : Error(what), det_magnitude_(det_magnitude) {}

    double det_magnitude() const noexcept { return det_magnitude_; }

private:
    double det_magnitude_;
};

/// Input violates a documented precondition (symmetry, definiteness, finiteness...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Potential is too strong for the eikonal treatment to be trusted.
class WeaknessError : public Error {
public:
    WeaknessError(const std::string& what, double ratio) : Error(what), ratio_(ratio) {}
    double ratio() const noexcept { return ratio_; }

private:
    double ratio_;
};

/// Bad configuration: grid too coarse, box too small, malformed config file.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical run diverged from its conservation guarantees.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace gaussrot
