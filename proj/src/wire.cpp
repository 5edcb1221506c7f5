#include "mpignite/wire.hpp"

#include <algorithm>
#include <charconv>
#include <limits>

namespace mpignite {

namespace {

ByteReader body_reader(std::span<const std::uint8_t> body) {
  return ByteReader(body, ErrorCode::kProtocol);
}

Payload read_payload(ByteReader& r) {
  auto bytes = r.blob();
  if (bytes.empty() || !kind_from_byte(bytes[0])) {
    throw Error(ErrorCode::kProtocol, "frame carries a payload without a valid kind byte");
  }
  return Payload{std::move(bytes)};
}

void write_entry(ByteWriter& w, const RankMapEntry& e) {
  w.u32(e.rank);
  w.u64(e.worker);
  w.str(e.address.host);
  w.u16(e.address.port);
}

RankMapEntry read_entry(ByteReader& r) {
  RankMapEntry e;
  e.rank = r.u32();
  e.worker = r.u64();
  e.address.host = r.str();
  e.address.port = r.u16();
  return e;
}

}  // namespace

std::optional<FrameKind> frame_kind_from_byte(std::uint8_t b) {
  if (b < kFrameKindCount) return static_cast<FrameKind>(b);
  return std::nullopt;
}

std::string_view to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::kHello: return "HELLO";
    case FrameKind::kTaskAssign: return "TASK_ASSIGN";
    case FrameKind::kResult: return "RESULT";
    case FrameKind::kUserMsg: return "USER_MSG";
    case FrameKind::kAddrReq: return "ADDR_REQ";
    case FrameKind::kAddrReply: return "ADDR_REPLY";
    case FrameKind::kCtxAllocReq: return "CTX_ALLOC_REQ";
    case FrameKind::kCtxAllocReply: return "CTX_ALLOC_REPLY";
    case FrameKind::kShutdown: return "SHUTDOWN";
    case FrameKind::kJobDone: return "JOB_DONE";
  }
  return "?";
}

Address parse_address(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(ErrorCode::kUsage, "address must be host:port, got '" + std::string(text) + "'");
  }
  const auto port_text = text.substr(colon + 1);
  unsigned port = 0;
  const auto [ptr, ec] =
      std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) {
    throw Error(ErrorCode::kUsage, "invalid port in '" + std::string(text) + "'");
  }
  return Address{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

WorkerId RankMap::worker_of(WorldRank rank) const {
  if (rank >= entries.size()) {
    throw Error(ErrorCode::kRouting, "rank " + std::to_string(rank) +
                                         " is outside a world of " +
                                         std::to_string(entries.size()));
  }
  return entries[rank].worker;
}

std::string_view to_string(RoutingMode mode) {
  return mode == RoutingMode::kP2P ? "p2p" : "relay";
}

RoutingMode parse_routing(std::string_view text) {
  if (text == "p2p" || text == "P2P" || text == "peer") return RoutingMode::kP2P;
  if (text == "relay" || text == "master-relay" || text == "MASTER_RELAY") {
    return RoutingMode::kMasterRelay;
  }
  throw Error(ErrorCode::kUsage, "routing must be p2p or relay, got '" + std::string(text) + "'");
}

Bytes write_frame(FrameKind kind, std::span<const std::uint8_t> body) {
  if (body.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kFrameTooLarge,
                "frame body of " + std::to_string(body.size()) + " bytes exceeds 2^32-1");
  }
  ByteWriter w;
  w.u32(kFrameMagic);
  w.u8(kWireVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u32(static_cast<std::uint32_t>(body.size()));
  w.raw(body);
  return std::move(w).take();
}

std::size_t MemorySource::read_some(std::span<std::uint8_t> out) {
  const auto n = std::min(out.size(), data_.size() - pos_);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin());
  pos_ += n;
  return n;
}

namespace {

// Returns the number of bytes read; fewer than out.size() only at end of stream.
std::size_t read_full(ByteSource& in, std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    const auto n = in.read_some(out.subspan(got));
    if (n == 0) break;
    got += n;
  }
  return got;
}

}  // namespace

std::optional<Frame> read_frame(ByteSource& in) {
  std::uint8_t header[kFrameHeaderSize];
  const auto got = read_full(in, header);
  if (got == 0) return std::nullopt;
  if (got < kFrameHeaderSize) {
    throw Error(ErrorCode::kConnectionLost, "stream ended inside a frame header");
  }
  ByteReader r(header, ErrorCode::kProtocol);
  const auto magic = r.u32();
  if (magic != kFrameMagic) {
    throw Error(ErrorCode::kProtocol, "bad frame magic");
  }
  const auto version = r.u8();
  if (version != kWireVersion) {
    throw Error(ErrorCode::kProtocol, "unsupported wire version " + std::to_string(version));
  }
  const auto kind_byte = r.u8();
  const auto kind = frame_kind_from_byte(kind_byte);
  if (!kind) {
    throw Error(ErrorCode::kProtocol, "unknown frame kind " + std::to_string(kind_byte));
  }
  const auto length = r.u32();
  Frame f{*kind, Bytes(length)};
  if (read_full(in, f.body) < length) {
    throw Error(ErrorCode::kConnectionLost, "stream ended inside a frame body");
  }
  return f;
}

Frame parse_frame(std::span<const std::uint8_t> bytes) {
  MemorySource src(bytes);
  auto f = read_frame(src);
  if (!f) throw Error(ErrorCode::kConnectionLost, "empty frame buffer");
  if (src.consumed() != bytes.size()) {
    throw Error(ErrorCode::kProtocol, "trailing bytes after frame");
  }
  return std::move(*f);
}

Bytes encode_hello(const Hello& h) {
  ByteWriter w;
  w.u64(h.worker);
  w.str(h.listen.host);
  w.u16(h.listen.port);
  return std::move(w).take();
}

Hello decode_hello(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  Hello h;
  h.worker = r.u64();
  h.listen.host = r.str();
  h.listen.port = r.u16();
  r.expect_end("HELLO");
  return h;
}

Bytes encode_job_spec(const JobSpec& spec) {
  ByteWriter w;
  w.u64(spec.job);
  w.str(spec.function);
  w.u32(spec.world_size);
  w.u32(static_cast<std::uint32_t>(spec.assigned.size()));
  for (auto rank : spec.assigned) w.u32(rank);
  w.u32(static_cast<std::uint32_t>(spec.rank_map.entries.size()));
  for (const auto& e : spec.rank_map.entries) write_entry(w, e);
  w.u8(static_cast<std::uint8_t>(spec.routing));
  w.u8(spec.parameter ? 1 : 0);
  if (spec.parameter) w.blob(spec.parameter->bytes);
  return std::move(w).take();
}

JobSpec decode_job_spec(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  JobSpec spec;
  spec.job = r.u64();
  spec.function = r.str();
  spec.world_size = r.u32();
  const auto n_assigned = r.u32();
  if (n_assigned > r.remaining() / 4) throw Error(ErrorCode::kProtocol, "assigned-rank count too large");
  for (std::uint32_t i = 0; i < n_assigned; ++i) {
    const auto rank = r.u32();
    if (rank >= spec.world_size) {
      throw Error(ErrorCode::kProtocol, "assigned rank outside the world");
    }
    spec.assigned.push_back(rank);
  }
  const auto n_entries = r.u32();
  if (n_entries != spec.world_size) {
    throw Error(ErrorCode::kProtocol, "rank map must hold one entry per world rank");
  }
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    auto e = read_entry(r);
    if (e.rank != i) throw Error(ErrorCode::kProtocol, "rank map entries out of order");
    spec.rank_map.entries.push_back(std::move(e));
  }
  const auto routing = r.u8();
  if (routing > 1) throw Error(ErrorCode::kProtocol, "unknown routing mode");
  spec.routing = static_cast<RoutingMode>(routing);
  const auto has_param = r.u8();
  if (has_param > 1) throw Error(ErrorCode::kProtocol, "bad parameter flag");
  if (has_param) spec.parameter = read_payload(r);
  r.expect_end("TASK_ASSIGN");
  return spec;
}

Bytes encode_result(const RankResult& res) {
  ByteWriter w;
  w.u64(res.job);
  w.u32(res.rank);
  w.u8(static_cast<std::uint8_t>(res.status));
  if (res.status == ResultStatus::kOk) {
    w.blob(res.value.bytes);
  } else {
    w.u8(static_cast<std::uint8_t>(res.error));
    w.str(res.message);
  }
  return std::move(w).take();
}

RankResult decode_result(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  RankResult res;
  res.job = r.u64();
  res.rank = r.u32();
  const auto status = r.u8();
  if (status > 1) throw Error(ErrorCode::kProtocol, "unknown result status");
  res.status = static_cast<ResultStatus>(status);
  if (res.status == ResultStatus::kOk) {
    res.value = read_payload(r);
  } else {
    res.error = static_cast<ErrorCode>(r.u8());
    res.message = r.str();
  }
  r.expect_end("RESULT");
  return res;
}

namespace {

void write_envelope(ByteWriter& w, const Envelope& e) {
  w.u64(e.context);
  w.u32(e.src);
  w.u32(e.dst);
  w.i32(e.tag);
  w.blob(e.payload.bytes);
}

Envelope read_envelope(ByteReader& r) {
  Envelope e;
  e.context = r.u64();
  e.src = r.u32();
  e.dst = r.u32();
  e.tag = r.i32();
  e.payload = read_payload(r);
  return e;
}

}  // namespace

Bytes encode_envelope(const Envelope& e) {
  ByteWriter w;
  write_envelope(w, e);
  return std::move(w).take();
}

Envelope decode_envelope(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  auto e = read_envelope(r);
  r.expect_end("envelope");
  return e;
}

Bytes encode_user_message(const UserMessage& m) {
  ByteWriter w;
  w.u64(m.job);
  write_envelope(w, m.envelope);
  return std::move(w).take();
}

UserMessage decode_user_message(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  UserMessage m;
  m.job = r.u64();
  m.envelope = read_envelope(r);
  r.expect_end("USER_MSG");
  return m;
}

Bytes encode_addr_request(WorldRank rank) {
  ByteWriter w;
  w.u32(rank);
  return std::move(w).take();
}

WorldRank decode_addr_request(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  const auto rank = r.u32();
  r.expect_end("ADDR_REQ");
  return rank;
}

Bytes encode_addr_reply(const RankMapEntry& e) {
  ByteWriter w;
  write_entry(w, e);
  return std::move(w).take();
}

RankMapEntry decode_addr_reply(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  auto e = read_entry(r);
  r.expect_end("ADDR_REPLY");
  return e;
}

Bytes encode_ctx_request(const CtxAllocRequest& req) {
  ByteWriter w;
  w.u64(req.request);
  w.u32(req.count);
  return std::move(w).take();
}

CtxAllocRequest decode_ctx_request(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  CtxAllocRequest req;
  req.request = r.u64();
  req.count = r.u32();
  r.expect_end("CTX_ALLOC_REQ");
  return req;
}

Bytes encode_ctx_reply(const CtxAllocReply& rep) {
  ByteWriter w;
  w.u64(rep.request);
  w.u64(rep.first);
  w.u32(rep.count);
  return std::move(w).take();
}

CtxAllocReply decode_ctx_reply(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  CtxAllocReply rep;
  rep.request = r.u64();
  rep.first = r.u64();
  rep.count = r.u32();
  r.expect_end("CTX_ALLOC_REPLY");
  return rep;
}

Bytes encode_job_done(JobId job) {
  ByteWriter w;
  w.u64(job);
  return std::move(w).take();
}

JobId decode_job_done(std::span<const std::uint8_t> body) {
  auto r = body_reader(body);
  const auto job = r.u64();
  r.expect_end("JOB_DONE");
  return job;
}

}  // namespace mpignite
