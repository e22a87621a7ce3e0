#pragma once

#include <stdexcept>
#include <string>

namespace ggsm {

/// Base class for every error this library raises on purpose. Callers that
/// do not care about the precise condition can catch this one type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// The requested moment does not exist for these parameters (the Gamma-ratio
/// argument is non-positive, which happens for negative r with eta too large).
class MomentUndefined : public Error {
public:
    using Error::Error;
};

/// Adaptive quadrature could not reach the requested tolerance, or the
/// integral diverges (mixture density at x = 0 when eta <= -1).
class QuadratureFailure : public Error {
public:
    using Error::Error;
};

class EmptySample : public Error {
public:
    using Error::Error;
};

class TooFewSamples : public Error {
public:
    using Error::Error;
};

class TooSmallImage : public Error {
public:
    using Error::Error;
};

class KernelLargerThanImage : public Error {
public:
    using Error::Error;
};

/// Band partitioning could not form even one band above the sample floor.
class DegeneratePartition : public Error {
public:
    using Error::Error;
};

/// Inputs do not match the grouping plan (wrong channel count, unknown
/// transform, profile forbids the requested transform, ...).
class PlanMismatch : public Error {
public:
    using Error::Error;
};

/// Trimming would leave fewer than two samples.
class OverTrimmed : public Error {
public:
    using Error::Error;
};

/// No admissible grid point produced a finite score for this block.
class AllFitsDegenerate : public Error {
public:
    using Error::Error;
};

class TooFewObservations : public Error {
public:
    using Error::Error;
};

class ZeroTrace : public Error {
public:
    using Error::Error;
};

class EigenFailure : public Error {
public:
    using Error::Error;
};

/// File-format violations (bad magic, truncated payload, schema mismatch).
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace ggsm
