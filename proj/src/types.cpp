#include "fundrank/types.hpp"

namespace fundrank {

const char* ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kZeroDepth: return "ZeroDepth";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kAsymmetricPair: return "AsymmetricPair";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kGeometryRetryExhausted: return "GeometryRetryExhausted";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kVanishingSkewPart: return "VanishingSkewPart";
    case ErrorCode::kDisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::kCollapseDetected: return "CollapseDetected";
    case ErrorCode::kZeroMatrix: return "ZeroMatrix";
    case ErrorCode::kDegenerateAlignment: return "DegenerateAlignment";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace fundrank
