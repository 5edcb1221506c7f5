#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mpignite {

enum class ErrorCode : std::uint8_t {
  kEncodeUnsupported = 1,
  kTypeMismatch,
  kMalformedPayload,
  kFrameTooLarge,
  kProtocol,
  kConnectionLost,
  kRouting,
  kTransportFailure,
  kReceiveAborted,
  kInvalidRank,
  kInvalidTag,
  kSplitProtocol,
  kUsage,
  kCollectiveAborted,
  kRegistry,
  kJobFailure,
  kUserError,
};

std::string_view to_string(ErrorCode code);

/// Base for every error raised by the runtime. The code survives the wire,
/// so a failure on a remote worker reaches the driver with the same code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mpignite
