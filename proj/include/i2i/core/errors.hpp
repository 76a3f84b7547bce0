#pragma once

#include <stdexcept>
#include <string>

namespace i2i {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image dimensions incompatible with an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A window or stride does not evenly divide a spatial extent.
class DivisibilityError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

/// Internally inconsistent metadata (e.g. a window grid whose blocks disagree
/// with its declared origin shape).
class StructuralError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became NaN/Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Training subjects leaked into an evaluation set.
class SplitViolation : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace i2i
