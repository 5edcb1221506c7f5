#pragma once

// Framed wire protocol shared by master, workers and peer connections.
//
//   magic u32 (0x4D504947) | version u8 (1) | kind u8 | body-length u32 | body
//
// All integers are little-endian. Body layouts per kind are in PROTOCOL.md.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpignite/codec.hpp"

namespace mpignite {

inline constexpr std::uint32_t kFrameMagic = 0x4D504947;  // "MPIG"
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 10;

enum class FrameKind : std::uint8_t {
  kHello = 0,
  kTaskAssign = 1,
  kResult = 2,
  kUserMsg = 3,
  kAddrReq = 4,
  kAddrReply = 5,
  kCtxAllocReq = 6,
  kCtxAllocReply = 7,
  kShutdown = 8,
  kJobDone = 9,
};

inline constexpr std::size_t kFrameKindCount = 10;

std::optional<FrameKind> frame_kind_from_byte(std::uint8_t b);
std::string_view to_string(FrameKind kind);

using ContextId = std::uint64_t;
using WorldRank = std::uint32_t;
using WorkerId = std::uint64_t;
using JobId = std::uint64_t;

inline constexpr ContextId kWorldContext = 0;

struct Envelope {
  ContextId context = kWorldContext;
  WorldRank src = 0;
  WorldRank dst = 0;
  std::int32_t tag = 0;
  Payload payload;

  bool operator==(const Envelope&) const = default;
};

struct Address {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  bool operator==(const Address&) const = default;
};

// Parses "host:port"; throws kUsage on malformed input.
Address parse_address(std::string_view text);

struct RankMapEntry {
  WorldRank rank = 0;
  WorkerId worker = 0;
  Address address;

  bool operator==(const RankMapEntry&) const = default;
};

struct RankMap {
  std::vector<RankMapEntry> entries;  // indexed by world rank

  WorkerId worker_of(WorldRank rank) const;
  bool operator==(const RankMap&) const = default;
};

enum class RoutingMode : std::uint8_t { kP2P = 0, kMasterRelay = 1 };

std::string_view to_string(RoutingMode mode);
// Accepts "p2p" and "relay" (plus long aliases); throws kUsage otherwise.
RoutingMode parse_routing(std::string_view text);

struct JobSpec {
  JobId job = 0;
  std::string function;
  std::uint32_t world_size = 0;
  std::vector<WorldRank> assigned;
  RankMap rank_map;
  RoutingMode routing = RoutingMode::kP2P;
  std::optional<Payload> parameter;

  bool operator==(const JobSpec&) const = default;
};

struct Hello {
  WorkerId worker = 0;
  Address listen;

  bool operator==(const Hello&) const = default;
};

enum class ResultStatus : std::uint8_t { kOk = 0, kFailed = 1 };

struct RankResult {
  JobId job = 0;
  WorldRank rank = 0;
  ResultStatus status = ResultStatus::kOk;
  Payload value;              // kOk
  ErrorCode error{};          // kFailed
  std::string message;        // kFailed

  bool operator==(const RankResult&) const = default;
};

struct UserMessage {
  JobId job = 0;
  Envelope envelope;

  bool operator==(const UserMessage&) const = default;
};

struct CtxAllocRequest {
  std::uint64_t request = 0;
  std::uint32_t count = 0;

  bool operator==(const CtxAllocRequest&) const = default;
};

struct CtxAllocReply {
  std::uint64_t request = 0;
  ContextId first = 0;
  std::uint32_t count = 0;

  bool operator==(const CtxAllocReply&) const = default;
};

struct Frame {
  FrameKind kind = FrameKind::kShutdown;
  Bytes body;

  bool operator==(const Frame&) const = default;
};

Bytes write_frame(FrameKind kind, std::span<const std::uint8_t> body);

// Source of bytes for read_frame. read_some returns 0 only at end of stream.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;
};

class MemorySource final : public ByteSource {
 public:
  explicit MemorySource(std::span<const std::uint8_t> data) : data_(data) {}
  std::size_t read_some(std::span<std::uint8_t> out) override;
  std::size_t consumed() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// Reads exactly one frame. Returns nullopt on a clean end of stream at a
// frame boundary; throws kConnectionLost on a short read and kProtocol on a
// bad magic, version or kind.
std::optional<Frame> read_frame(ByteSource& in);

// Parses a complete in-memory frame, requiring no trailing bytes.
Frame parse_frame(std::span<const std::uint8_t> bytes);

// Body codecs. Decoders throw kProtocol on truncated or trailing bytes.
Bytes encode_hello(const Hello& h);
Hello decode_hello(std::span<const std::uint8_t> body);

Bytes encode_job_spec(const JobSpec& spec);
JobSpec decode_job_spec(std::span<const std::uint8_t> body);

Bytes encode_result(const RankResult& r);
RankResult decode_result(std::span<const std::uint8_t> body);

Bytes encode_envelope(const Envelope& e);
Envelope decode_envelope(std::span<const std::uint8_t> body);

Bytes encode_user_message(const UserMessage& m);
UserMessage decode_user_message(std::span<const std::uint8_t> body);

Bytes encode_addr_request(WorldRank rank);
WorldRank decode_addr_request(std::span<const std::uint8_t> body);

Bytes encode_addr_reply(const RankMapEntry& e);
RankMapEntry decode_addr_reply(std::span<const std::uint8_t> body);

Bytes encode_ctx_request(const CtxAllocRequest& r);
CtxAllocRequest decode_ctx_request(std::span<const std::uint8_t> body);

Bytes encode_ctx_reply(const CtxAllocReply& r);
CtxAllocReply decode_ctx_reply(std::span<const std::uint8_t> body);

Bytes encode_job_done(JobId job);
JobId decode_job_done(std::span<const std::uint8_t> body);

}  // namespace mpignite
