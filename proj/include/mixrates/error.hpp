#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mixrates {

enum class ErrorKind {
  InvalidArgument,
  InvalidWeights,
  InvalidCovariance,
  OutOfSpace,
  MetricMismatch,
  MissingCovariance,
  SingularCovariance,
  DimensionMismatch,
  DimensionUnsupported,
  SupportTooLarge,
  InfeasibleMarginals,
  UnsupportedCellOrder,
  NonpositiveWeight,
  DegenerateData,
  UnsupportedModel,
  InsufficientData,
  ParseError,
};

/// Stable name of an error kind, as surfaced by the CLI.
std::string_view kind_name(ErrorKind kind) noexcept;

/// Library exception. what() is "<KindName>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mixrates
