// SPDX-License-Identifier: Apache-2.0
//
// Exception types raised by the toolkit. Every error the library throws
// derives from ctxbias::Error so callers can catch one type at the boundary.

#ifndef CTXBIAS_ERRORS_H_
#define CTXBIAS_ERRORS_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctxbias {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatch, empty input, out-of-range id and similar contract breaks.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid model or filter configuration (e.g. head count not dividing d).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The label cannot be aligned to the given number of frames.
class InfeasibleAlignmentError : public Error {
 public:
  using Error::Error;
};

// A brute-force oracle was asked to enumerate more than its budget.
class OracleRefusedError : public Error {
 public:
  using Error::Error;
};

class TokenizationError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the byte offset (binary formats) or the
// field/line name (text formats) where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string location)
      : Error(what + " [at " + location + "]"), detail_(what), location_(std::move(location)) {}
  const std::string& detail() const { return detail_; }
  const std::string& location() const { return location_; }

 private:
  std::string detail_;
  std::string location_;
};

}  // namespace ctxbias

#endif  // CTXBIAS_ERRORS_H_
