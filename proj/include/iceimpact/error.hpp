#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iceimpact {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied value is outside its documented domain (bad lambda,
// unknown feature, incompatible metric). The CLI maps these to exit code 2.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input data could not be loaded or is unusable.
class DataError : public Error {
 public:
  using Error::Error;
};

// A cell failed to parse as a number.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : DataError(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// The least-squares system has fewer rows than unknowns and no ridge
// fallback was allowed.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// Base for failures raised while querying a predictor.
class PredictorError : public Error {
 public:
  using Error::Error;
};

// Query matrix column count differs from the model's training width.
class DimensionMismatchError : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

// Failures of the external batch protocol. `batch()` is the zero-based
// index of the batch that was in flight.
class ExternalPredictorError : public PredictorError {
 public:
  ExternalPredictorError(std::size_t batch, const std::string& what)
      : PredictorError("batch " + std::to_string(batch) + ": " + what),
        batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

class ChildProcessError : public ExternalPredictorError {
 public:
  using ExternalPredictorError::ExternalPredictorError;
};

class MalformedResponseError : public ExternalPredictorError {
 public:
  using ExternalPredictorError::ExternalPredictorError;
};

class CountMismatchError : public ExternalPredictorError {
 public:
  using ExternalPredictorError::ExternalPredictorError;
};

class TimeoutError : public ExternalPredictorError {
 public:
  using ExternalPredictorError::ExternalPredictorError;
};

// Wraps a failure that occurred while analysing one feature. The original
// exception is nested (std::throw_with_nested).
class FeatureError : public Error {
 public:
  FeatureError(std::size_t feature, const std::string& what)
      : Error("feature " + std::to_string(feature) + ": " + what),
        feature_(feature) {}
  std::size_t feature() const { return feature_; }

 private:
  std::size_t feature_;
};

}  // namespace iceimpact
