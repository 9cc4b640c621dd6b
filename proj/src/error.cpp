#include "vibias/error.hpp"

namespace vibias {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AllMassZero: return "AllMassZero";
    case ErrorCode::UnsupportedPair: return "UnsupportedPair";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::AxesMismatch: return "AxesMismatch";
    case ErrorCode::EmptyBlock: return "EmptyBlock";
    case ErrorCode::NotProductMeasure: return "NotProductMeasure";
    case ErrorCode::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NoProgress: return "NoProgress";
    case ErrorCode::RepresentationMismatch: return "RepresentationMismatch";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::BlockOverlap: return "BlockOverlap";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPolynomial: return "NotPolynomial";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotBlockAdditive: return "NotBlockAdditive";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace vibias
