#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dec {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar or structural argument is outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the byte offset (binary formats) or the
/// 1-based line number (text formats) at which decoding failed.
class FormatError : public Error {
 public:
  enum class Position { ByteOffset, Line };

  FormatError(const std::string& what, Position kind, std::size_t position)
      : Error(what + (kind == Position::ByteOffset ? " (at byte offset " : " (at line ") +
              std::to_string(position) + ")"),
        kind_(kind),
        position_(position) {}

  Position position_kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }

 private:
  Position kind_;
  std::size_t position_;
};

/// The data cannot support the requested operation (e.g. all-zero features).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// A cluster received zero soft mass, so the target distribution is undefined.
class DegenerateClusterError : public Error {
 public:
  DegenerateClusterError(const std::string& what, std::size_t cluster)
      : Error(what), cluster_(cluster) {}
  std::size_t cluster() const noexcept { return cluster_; }

 private:
  std::size_t cluster_;
};

/// Optimization produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dec
