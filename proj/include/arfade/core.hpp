#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace arfade {

using cplx = std::complex<double>;

/// Rows index receive antennas, columns index time.
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Coefficients whose characteristic polynomial has a root on or outside the unit circle.
class NonStationaryError : public Error {
public:
    NonStationaryError(const std::string& what, double spectral_radius)
        : Error(what), spectral_radius_(spectral_radius) {}

    double spectral_radius() const noexcept { return spectral_radius_; }

private:
    double spectral_radius_;
};

/// Raised by the Yule-Walker solve when the Toeplitz system cannot be trusted.
class IllConditionedError : public Error {
public:
    IllConditionedError(const std::string& what, double condition_number)
        : Error(what), condition_number_(condition_number) {}

    /// +inf when the matrix is singular or its leading entry is non-positive.
    double condition_number() const noexcept { return condition_number_; }

private:
    double condition_number_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace arfade
