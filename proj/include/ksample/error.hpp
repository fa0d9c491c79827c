#pragma once

#include <stdexcept>
#include <string>

namespace ksample {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (shape mismatch, non-finite values, bad counts).
class InputError : public Error {
public:
    using Error::Error;
};

/// Too few samples for the requested statistic.
class SampleSizeError : public Error {
public:
    using Error::Error;
};

/// A normalizer vanished: constant sample, zero self-covariance, zero bandwidth.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Ill-conditioned or rank-deficient covariance in the parametric baselines.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Simulation parameters that do not describe a valid geometry.
class GeometryError : public Error {
public:
    using Error::Error;
};

}  // namespace ksample
