#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace nelson {

// Momenta live in the plane; one-dimensional models keep the second slot at zero.
using Vec = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using cplx = std::complex<double>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class SizingError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

// Input lies outside the region where a construction is defined.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class SupportError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class ConstructionError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class ResolutionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SolverError : public NumericalError {
public:
    SolverError(const std::string& what, double achieved_residual)
        : NumericalError(what), residual(achieved_residual) {}
    double residual;
};

inline Vec make_vec(double x, double y = 0.0) { return Vec(x, y); }

}  // namespace nelson
