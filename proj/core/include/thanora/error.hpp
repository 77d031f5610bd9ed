// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace thanora {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not line up, or a rank request beyond what a matrix holds.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, or a computation that produced them.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A matrix that should have been positive definite was not.
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Rank budgets that cannot be satisfied.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unreadable configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system and artifact format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace thanora
