#pragma once

#include <stdexcept>
#include <string>

namespace jhsvd {

/// Failure category; the CLI maps each one to a distinct exit code.
enum class ErrorKind { invalid_argument, numeric, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::invalid_argument, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

/// Loss of full column rank detected while factorizing or orthogonalizing.
/// `index` is the offending (local) column or pivot.
class RankDeficiency : public NumericError {
 public:
  RankDeficiency(const std::string& what, long index) : NumericError(what), index_(index) {}
  [[nodiscard]] long index() const noexcept { return index_; }

 private:
  long index_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace jhsvd
