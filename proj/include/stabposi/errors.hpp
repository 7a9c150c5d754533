#pragma once

#include <stdexcept>
#include <string>

namespace stabposi {

/// Base class for every recoverable error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class DegenerateLevel : public Error {
 public:
  using Error::Error;
};

class MixedSlack : public Error {
 public:
  using Error::Error;
};

class BadWeights : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class UnregisteredOrlicz : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class AllCandidatesCollinear : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (CSV or config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Precondition violation on a numeric argument (out of domain, non-finite, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace stabposi
