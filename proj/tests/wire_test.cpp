#include <gtest/gtest.h>

#include "generators.hpp"
#include "mpignite/wire.hpp"
#include "oracles.hpp"

using namespace mpignite;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mpignite::Error";
  return ErrorCode::kUserError;
}

JobSpec sample_spec() {
  JobSpec s;
  s.job = 7;
  s.function = "matvec2d";
  s.world_size = 4;
  s.assigned = {1, 3};
  for (WorldRank r = 0; r < 4; ++r) s.rank_map.entries.push_back({r, r % 2 + 1ull, {"10.0.0.1", 4000}});
  s.routing = RoutingMode::kMasterRelay;
  s.parameter = encode(std::int32_t{300});
  return s;
}

}  // namespace

TEST(Wire, EmptyShutdownFrameIsTenBytes) {
  const auto f = write_frame(FrameKind::kShutdown, {});
  EXPECT_EQ(f, (Bytes{0x47, 0x49, 0x50, 0x4D, 0x01, 0x08, 0, 0, 0, 0}));
  EXPECT_EQ(f.size(), kFrameHeaderSize);
}

TEST(Wire, MatchesReferenceLayout) {
  const Bytes body{1, 2, 3};
  EXPECT_EQ(write_frame(FrameKind::kUserMsg, body), oracle::frame(3, body));
}

TEST(Wire, TwoConcatenatedFramesReadInOrder) {
  auto stream = write_frame(FrameKind::kAddrReq, encode_addr_request(5));
  const auto second = write_frame(FrameKind::kJobDone, encode_job_done(9));
  stream.insert(stream.end(), second.begin(), second.end());
  MemorySource src(stream);
  auto a = read_frame(src);
  auto b = read_frame(src);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->kind, FrameKind::kAddrReq);
  EXPECT_EQ(decode_addr_request(a->body), 5u);
  EXPECT_EQ(b->kind, FrameKind::kJobDone);
  EXPECT_EQ(decode_job_done(b->body), 9u);
  EXPECT_FALSE(read_frame(src).has_value());
  EXPECT_EQ(src.consumed(), stream.size());
}

TEST(Wire, RejectsBadHeaders) {
  auto bad_magic = write_frame(FrameKind::kShutdown, {});
  bad_magic[0] ^= 0xFF;
  EXPECT_EQ(code_of([&] { parse_frame(bad_magic); }), ErrorCode::kProtocol);

  auto bad_version = write_frame(FrameKind::kShutdown, {});
  bad_version[4] = 2;
  EXPECT_EQ(code_of([&] { parse_frame(bad_version); }), ErrorCode::kProtocol);

  auto bad_kind = write_frame(FrameKind::kShutdown, {});
  bad_kind[5] = 255;
  EXPECT_EQ(code_of([&] { parse_frame(bad_kind); }), ErrorCode::kProtocol);
  bad_kind[5] = 10;
  EXPECT_EQ(code_of([&] { parse_frame(bad_kind); }), ErrorCode::kProtocol);
}

TEST(Wire, TruncationIsConnectionLost) {
  const auto f = write_frame(FrameKind::kUserMsg, Bytes(20, 0xAB));
  for (std::size_t len = 1; len < f.size(); ++len) {
    std::span<const std::uint8_t> cut(f.data(), len);
    MemorySource src(cut);
    EXPECT_EQ(code_of([&] { read_frame(src); }), ErrorCode::kConnectionLost) << len;
  }
}

TEST(Wire, BodiesRoundTrip) {
  const Hello h{3, {"127.0.0.1", 7077}};
  EXPECT_EQ(decode_hello(encode_hello(h)), h);

  const auto spec = sample_spec();
  EXPECT_EQ(decode_job_spec(encode_job_spec(spec)), spec);

  RankResult ok{7, 2, ResultStatus::kOk, encode(std::int32_t{14}), {}, {}};
  EXPECT_EQ(decode_result(encode_result(ok)), ok);
  RankResult bad{7, 3, ResultStatus::kFailed, {}, ErrorCode::kUserError, "boom"};
  EXPECT_EQ(decode_result(encode_result(bad)), bad);

  const UserMessage m{4, Envelope{12, 1, 2, -3, encode(std::string("x"))}};
  EXPECT_EQ(decode_user_message(encode_user_message(m)), m);

  const RankMapEntry e{5, 2, {"host", 1}};
  EXPECT_EQ(decode_addr_reply(encode_addr_reply(e)), e);
  EXPECT_EQ(decode_ctx_request(encode_ctx_request({8, 3})), (CtxAllocRequest{8, 3}));
  EXPECT_EQ(decode_ctx_reply(encode_ctx_reply({8, 11, 3})), (CtxAllocReply{8, 11, 3}));
}

TEST(Wire, EnvelopeLayout) {
  const Envelope e{0x0102030405060708ull, 1, 2, -1, encode(true)};
  const Bytes expected{8, 7, 6, 5, 4, 3, 2, 1,  1, 0, 0, 0,  2, 0, 0, 0,
                       0xFF, 0xFF, 0xFF, 0xFF,  2, 0, 0, 0,  0x04, 0x01};
  EXPECT_EQ(encode_envelope(e), expected);
}

TEST(Wire, JobSpecValidation) {
  auto s = sample_spec();
  s.assigned = {4};
  EXPECT_EQ(code_of([&] { decode_job_spec(encode_job_spec(s)); }), ErrorCode::kProtocol);
  s = sample_spec();
  s.rank_map.entries.pop_back();
  EXPECT_EQ(code_of([&] { decode_job_spec(encode_job_spec(s)); }), ErrorCode::kProtocol);
  s = sample_spec();
  std::swap(s.rank_map.entries[0], s.rank_map.entries[1]);
  EXPECT_EQ(code_of([&] { decode_job_spec(encode_job_spec(s)); }), ErrorCode::kProtocol);
}

TEST(Wire, TrailingBodyBytesAreRejected) {
  auto body = encode_job_done(1);
  body.push_back(0);
  EXPECT_EQ(code_of([&] { decode_job_done(body); }), ErrorCode::kProtocol);
}

TEST(Wire, RankMapLookup) {
  const auto spec = sample_spec();
  EXPECT_EQ(spec.rank_map.worker_of(3), 2u);
  EXPECT_EQ(code_of([&] { spec.rank_map.worker_of(4); }), ErrorCode::kRouting);
}

TEST(Wire, AddressesAndRouting) {
  EXPECT_EQ(parse_address("127.0.0.1:7077"), (Address{"127.0.0.1", 7077}));
  EXPECT_EQ(parse_address("0.0.0.0:0").port, 0);
  EXPECT_EQ(code_of([] { parse_address("nohost"); }), ErrorCode::kUsage);
  EXPECT_EQ(code_of([] { parse_address("h:70000"); }), ErrorCode::kUsage);
  EXPECT_EQ(parse_routing("relay"), RoutingMode::kMasterRelay);
  EXPECT_EQ(parse_routing("MASTER_RELAY"), RoutingMode::kMasterRelay);
  EXPECT_EQ(parse_routing("p2p"), RoutingMode::kP2P);
  EXPECT_EQ(code_of([] { parse_routing("carrier-pigeon"); }), ErrorCode::kUsage);
}

TEST(WireProperty, RandomFramesRoundTrip) {
  gen::Rng rng(424242);
  Bytes stream;
  std::vector<Frame> sent;
  for (int i = 0; i < 3000; ++i) {
    Frame f{gen::frame_kind(rng), gen::bytes(rng, 64)};
    const auto bytes = write_frame(f.kind, f.body);
    ASSERT_EQ(bytes, oracle::frame(static_cast<std::uint8_t>(f.kind), f.body));
    ASSERT_EQ(parse_frame(bytes), f);
    stream.insert(stream.end(), bytes.begin(), bytes.end());
    sent.push_back(std::move(f));
  }
  MemorySource src(stream);
  for (const auto& f : sent) {
    auto got = read_frame(src);
    ASSERT_TRUE(got);
    ASSERT_EQ(*got, f);
  }
  EXPECT_FALSE(read_frame(src));
}

TEST(WireProperty, UserMessagesRoundTrip) {
  gen::Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    UserMessage m{rng(), Envelope{rng(), static_cast<WorldRank>(rng()), static_cast<WorldRank>(rng()),
                                  static_cast<std::int32_t>(rng()), encode(gen::value(rng))}};
    const auto frame = write_frame(FrameKind::kUserMsg, encode_user_message(m));
    ASSERT_EQ(decode_user_message(parse_frame(frame).body), m);
  }
}
