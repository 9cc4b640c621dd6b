#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vibias {

enum class ErrorCode {
  InvalidArgument,
  AllMassZero,
  UnsupportedPair,
  SupportMismatch,
  AxesMismatch,
  EmptyBlock,
  NotProductMeasure,
  NonPositiveDefinite,
  NotNormalized,
  NoProgress,
  RepresentationMismatch,
  NotConverged,
  ZeroVariance,
  BlockOverlap,
  ZeroVector,
  DimensionMismatch,
  NotPolynomial,
  ShapeMismatch,
  NotBlockAdditive,
  ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a stable machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vibias
