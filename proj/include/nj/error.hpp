#pragma once

#include <stdexcept>
#include <string>

namespace nj {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// An exact oracle refused a problem whose support exceeds the configured cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

// A realization on which the estimator or proxy is undefined (e.g. an empty
// Hajek arm).
class DegenerateRealization : public Error {
 public:
  using Error::Error;
};

class NoClosedForm : public Error {
 public:
  using Error::Error;
};

class NonReversibleKernel : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace nj
