#pragma once

#include <stdexcept>
#include <string>

namespace subcm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (k <= 0, ka <= 0, z0 <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Matrix or vector dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Expansion order or quadrature grid too coarse for the requested accuracy.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Invalid scene geometry (coincident dipoles, dipole on the ground plane, ...).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Index map that is not injective or points outside the target basis.
class MappingError : public Error {
 public:
  using Error::Error;
};

/// Input violates an operator contract (symmetry, linearity) that an algorithm relies on.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Singular or numerically singular system. Carries the reciprocal condition estimate.
class LinearSolveError : public Error {
 public:
  LinearSolveError(const std::string& what, double rcond)
      : Error(what + " (rcond estimate " + std::to_string(rcond) + ")"), rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

}  // namespace subcm
