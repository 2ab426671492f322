#include "mixrates/error.hpp"

namespace mixrates {

std::string_view kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidWeights: return "InvalidWeights";
    case ErrorKind::InvalidCovariance: return "InvalidCovariance";
    case ErrorKind::OutOfSpace: return "OutOfSpace";
    case ErrorKind::MetricMismatch: return "MetricMismatch";
    case ErrorKind::MissingCovariance: return "MissingCovariance";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorKind::SupportTooLarge: return "SupportTooLarge";
    case ErrorKind::InfeasibleMarginals: return "InfeasibleMarginals";
    case ErrorKind::UnsupportedCellOrder: return "UnsupportedCellOrder";
    case ErrorKind::NonpositiveWeight: return "NonpositiveWeight";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::UnsupportedModel: return "UnsupportedModel";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(kind_name(kind)) + ": " + detail), kind_(kind) {}

}  // namespace mixrates
