#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lpre {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a Dataset invariant (shape, finiteness, positivity).
class InvalidData : public Error {
 public:
  using Error::Error;
};

/// The local design at an evaluation point has no usable data
/// (S0*S2 - S1^2 at or below the degeneracy guard).
class DegenerateDesign : public Error {
 public:
  DegenerateDesign(double z, const std::string& what)
      : Error(what), point_(z) {}
  double point() const noexcept { return point_; }

 private:
  double point_;
};

class NoValidBandwidth : public Error {
 public:
  using Error::Error;
};

/// A reduced coefficient left the open unit ball.
class OutsideBall : public Error {
 public:
  using Error::Error;
};

class SingularInformation : public Error {
 public:
  using Error::Error;
};

class NoDescent : public Error {
 public:
  NoDescent(double grad_norm, const std::string& what)
      : Error(what), grad_norm_(grad_norm) {}
  double grad_norm() const noexcept { return grad_norm_; }

 private:
  double grad_norm_;
};

class DegenerateCovariates : public Error {
 public:
  DegenerateCovariates(std::size_t column, const std::string& what)
      : Error(what), column_(column) {}
  /// Zero-based index of the first column that is linearly dependent on
  /// the preceding ones.
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class TooManyFailures : public Error {
 public:
  using Error::Error;
};

class UndefinedPValue : public Error {
 public:
  using Error::Error;
};

class AbortedRun : public Error {
 public:
  using Error::Error;
};

class SamplerFault : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t col, const std::string& what)
      : Error(what), row_(row), col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class NonPositiveResponse : public Error {
 public:
  NonPositiveResponse(std::size_t row, const std::string& what)
      : Error(what), row_(row) {}
  /// 1-based data row (header excluded).
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace lpre
