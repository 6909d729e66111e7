#pragma once

#include <stdexcept>
#include <string>

namespace subheat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A builder was asked for a resolution outside its supported range.
class InvalidResolution : public Error
{
public:
  using Error::Error;
};

/// A time or radius grid is empty, degenerate or outside the resolved window.
class InvalidGrid : public Error
{
public:
  using Error::Error;
};

/// Arguments outside the mathematical domain of an operation.
class DomainError : public Error
{
public:
  using Error::Error;
};

/// Quadrature failed to reach the requested tolerance.
class AccuracyError : public Error
{
public:
  AccuracyError(const std::string& what, double achieved)
    : Error(what + " (achieved error " + std::to_string(achieved) + ")")
    , achieved_(achieved)
  {
  }

  double achieved() const noexcept { return achieved_; }

private:
  double achieved_;
};

/// Problem size exceeds the dense-linear-algebra budget.
class ResourceError : public Error
{
public:
  using Error::Error;
};

/// A structural invariant of an input object does not hold.
class InvariantViolation : public Error
{
public:
  using Error::Error;
};

/// Missing or inconsistent configuration (e.g. kappa unset, K touching the boundary).
class ConfigurationError : public Error
{
public:
  using Error::Error;
};

/// The requested check does not apply for the given (d_H, d_W, delta, kappa).
class WrongRegime : public Error
{
public:
  using Error::Error;
};

} // namespace subheat
