#pragma once

#include <stdexcept>
#include <string>

namespace fb {

// Base of every error the harness raises deliberately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A non-finite gradient or parameter appeared during an update.
class NumericalInstability : public Error {
 public:
  using Error::Error;
};

// A supervised phase ran out of eligible examples in its fold.
class StreamExhausted : public Error {
 public:
  using Error::Error;
};

class NonTerminatingPolicy : public Error {
 public:
  using Error::Error;
};

// Every candidate of a sweep was disqualified.
class SweepFailed : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fb
