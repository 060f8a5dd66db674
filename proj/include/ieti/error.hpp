#pragma once

#include <stdexcept>
#include <string>

namespace ieti {

/// Base of all exceptions raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parameter outside its admissible domain (e.g. x outside [0,1]).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed input object (knot vector, patch layout, config, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class AssemblyError : public Error {
public:
    using Error::Error;
};

/// Non-positive pivot in a Cholesky factorization.
class NotSpdError : public Error {
public:
    using Error::Error;
};

/// Right-hand side not orthogonal to the kernel of a semidefinite operator.
class InconsistentRhsError : public Error {
public:
    using Error::Error;
};

/// Negative curvature in the non-standard inner product of SZ-PCG or BPCG,
/// i.e. the required one-sided preconditioner ordering does not hold.
class OrderViolationError : public Error {
public:
    using Error::Error;
};

/// Rank-deficient primal constraints.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// An inner or outer iterative solve did not converge; `stage` names it.
class SolveFailure : public Error {
public:
    SolveFailure(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage))
    {
    }
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

} // namespace ieti
