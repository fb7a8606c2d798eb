#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>

namespace morss {

// ---------------------------------------------------------------------------
// Error taxonomy.
//
// Every failure the library can raise maps onto one of three categories so
// the command line tool can translate it into a stable process exit code:
//
//   Config  -> 2   malformed run configuration (unknown key, bad value, ...)
//   Data    -> 3   unusable input data (missing column, bad cell, too small)
//   Numeric -> 4   the computation itself failed (singular system, separation,
//                  non-convergence, degenerate selection denominators)
// ---------------------------------------------------------------------------

enum class ErrorKind { Config, Data, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::Config: return 2;
      case ErrorKind::Data: return 3;
      case ErrorKind::Numeric: return 4;
    }
    return 4;
  }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};

// Unusable arguments or data shapes (negative shrinkage, empty input, ...).
class InvalidInputError : public DataError {
 public:
  explicit InvalidInputError(const std::string& msg) : DataError(msg) {}
};

// Population too small for the requested sampling design.
class InsufficientPopulationError : public DataError {
 public:
  explicit InsufficientPopulationError(const std::string& msg) : DataError(msg) {}
};

// Linear system is rank deficient or too ill-conditioned to trust.
class SingularSystemError : public NumericError {
 public:
  explicit SingularSystemError(const std::string& msg) : NumericError(msg) {}
};

// A data-driven selection rule divides by a quantity that is (numerically)
// zero, e.g. a zero coefficient vector.
class DegenerateCoefficientsError : public NumericError {
 public:
  explicit DegenerateCoefficientsError(const std::string& msg) : NumericError(msg) {}
};

// Maximum-likelihood logistic fit diverged: the data are (close to)
// perfectly separated, so no finite maximiser exists.
class SeparationError : public NumericError {
 public:
  explicit SeparationError(const std::string& msg) : NumericError(msg) {}
};

// Iteration budget exhausted without meeting the convergence tolerance.
class ConvergenceError : public NumericError {
 public:
  explicit ConvergenceError(const std::string& msg) : NumericError(msg) {}
};

// A tuning-parameter search produced no usable candidate.
class SelectionFailureError : public NumericError {
 public:
  explicit SelectionFailureError(const std::string& msg) : NumericError(msg) {}
};

// ---------------------------------------------------------------------------
// Shared data types.
// ---------------------------------------------------------------------------

enum class ResponseKind { Continuous, Binary };

// Design matrix plus response. For Binary responses y must be 0/1.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  ResponseKind kind = ResponseKind::Continuous;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

// How a pair of shrinkage constants was chosen.
enum class SelectionRule { Hkb, LiuType, LogisticKp1, Manual };

struct ShrinkageParams {
  double k = 0.0;
  double d = 0.0;
  SelectionRule rule = SelectionRule::Manual;
};

inline const char* selection_rule_name(SelectionRule r) {
  switch (r) {
    case SelectionRule::Hkb: return "hkb";
    case SelectionRule::LiuType: return "liu";
    case SelectionRule::LogisticKp1: return "kp1";
    case SelectionRule::Manual: return "manual";
  }
  return "manual";
}

// Result of a (penalised) least-squares style fit.
struct FitResult {
  Eigen::VectorXd beta;
  std::optional<ShrinkageParams> params;   // absent for plain least squares
  std::optional<double> sigma2_hat;        // residual variance when defined
  double condition = 0.0;                  // condition number of solved system
};

}  // namespace morss
