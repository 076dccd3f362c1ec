// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace chansr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or grid dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Arguments outside an operation's documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or version-mismatched file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared where only finite values are allowed.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Rejection sampling exhausted its attempt budget.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A checkpoint was produced under a different architecture, scale or
// normalization than the run trying to use it.
class ConfigMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace chansr
