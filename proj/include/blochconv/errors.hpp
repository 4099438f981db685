#pragma once

#include <stdexcept>
#include <string>

namespace blochconv {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A line grid does not cover the periodic domain it is asked to hold.
class DomainTooSmall : public Error {
public:
    using Error::Error;
};

/// Periodic and line grids do not share a common sample lattice.
class IncompatibleSpacing : public Error {
public:
    using Error::Error;
};

/// Two functions that must live on the same grid do not.
class GridMismatch : public Error {
public:
    using Error::Error;
};

/// A Bloch family whose frequencies or slice shapes are inconsistent.
class MalformedFamily : public Error {
public:
    using Error::Error;
};

/// A hypothesis required by an estimate (for example s > 2) is violated.
class HypothesisViolation : public Error {
public:
    using Error::Error;
};

class TruncationTooSmall : public Error {
public:
    using Error::Error;
};

/// The matrix exponential of a Bloch block overflowed.
class NonFinite : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class SingularJacobian : public Error {
public:
    using Error::Error;
};

class NotIncreasing : public Error {
public:
    using Error::Error;
};

/// A scheduled period n*T/2 exceeds the half-width of the line grid.
class ScheduleExceedsDomain : public Error {
public:
    using Error::Error;
};

} // namespace blochconv
