#pragma once

#include <stdexcept>
#include <string>

namespace lotus {

// Base class for all toolkit errors. CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file (CSV, store line, embedding matrix).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Bad user configuration (unknown label column, invalid option value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data cannot support the requested operation (all columns constant,
// identical points where variance is required).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Matrix / vector shape mismatch between arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Covariance rank too low for the requested component count.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// Numerical failure inside an iterative solver.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Low-rank coupling factor collapsed below the positivity floor.
class RankCollapseError : public Error {
 public:
  using Error::Error;
};

// Estimator hyperparameter outside its valid range for the given data.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the given inputs (single-class labels, k = n).
class MetricError : public Error {
 public:
  using Error::Error;
};

// Query against a meta-store with no entries for the task.
class EmptyStoreError : public Error {
 public:
  using Error::Error;
};

// Every trial of a search failed.
class SearchError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure (unreadable/unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lotus
