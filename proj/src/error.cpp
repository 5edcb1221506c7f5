#include "mpignite/error.hpp"

namespace mpignite {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEncodeUnsupported: return "encode-unsupported";
    case ErrorCode::kTypeMismatch: return "type-mismatch";
    case ErrorCode::kMalformedPayload: return "malformed-payload";
    case ErrorCode::kFrameTooLarge: return "frame-too-large";
    case ErrorCode::kProtocol: return "protocol-error";
    case ErrorCode::kConnectionLost: return "connection-lost";
    case ErrorCode::kRouting: return "routing-error";
    case ErrorCode::kTransportFailure: return "transport-failure";
    case ErrorCode::kReceiveAborted: return "receive-aborted";
    case ErrorCode::kInvalidRank: return "invalid-rank";
    case ErrorCode::kInvalidTag: return "invalid-tag";
    case ErrorCode::kSplitProtocol: return "split-protocol";
    case ErrorCode::kUsage: return "usage-error";
    case ErrorCode::kCollectiveAborted: return "collective-aborted";
    case ErrorCode::kRegistry: return "registry-error";
    case ErrorCode::kJobFailure: return "job-failure";
    case ErrorCode::kUserError: return "user-error";
  }
  return "unknown-error";
}

}  // namespace mpignite
