#include <gtest/gtest.h>

#include <future>
#include <set>

#include "mpignite/transport.hpp"

using namespace mpignite;
using namespace std::chrono_literals;

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

}  // namespace

TEST(LocalTransport, SelfSendOnSingleRank) {
  LocalTransport t(1);
  t.deliver(Envelope{0, 0, 0, 0, encode(std::int32_t{5})});
  EXPECT_EQ(decode_as<std::int32_t>(t.mailbox(0).receive({0, 0, 0})), 5);
}

TEST(LocalTransport, DeliverIsDirectEnqueueWithoutFrames) {
  LocalTransport t(2);
  t.deliver(Envelope{0, 0, 1, 0, encode(true)});
  EXPECT_EQ(t.mailbox(1).buffered_count(), 1u);
  EXPECT_EQ(t.counters().total_sent(), 0u);
}

TEST(LocalTransport, UnknownDestinationIsRoutingError) {
  LocalTransport t(3);
  EXPECT_EQ(code_of([&] { t.deliver(Envelope{0, 0, 3, 0, encode(true)}); }), ErrorCode::kRouting);
  EXPECT_EQ(code_of([&] { t.mailbox(3); }), ErrorCode::kRouting);
  EXPECT_EQ(code_of([] { LocalTransport bad(0); }), ErrorCode::kUsage);
}

TEST(LocalTransport, AbortReachesEveryMailbox) {
  LocalTransport t(3);
  t.abort(ErrorCode::kReceiveAborted, "stop");
  for (WorldRank r = 0; r < 3; ++r) EXPECT_TRUE(t.mailbox(r).aborted());
}

TEST(ContextAllocator, IdsAreUniqueAndNeverZero) {
  ContextAllocator alloc;
  std::set<ContextId> seen;
  std::vector<std::thread> threads;
  std::mutex mu;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 200; ++i) {
        const std::uint32_t count = 1 + i % 3;
        const auto first = alloc.allocate(count);
        std::lock_guard lock(mu);
        for (std::uint32_t k = 0; k < count; ++k) {
          EXPECT_TRUE(seen.insert(first + k).second);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(seen.count(kWorldContext), 0u);
  EXPECT_EQ(code_of([&] { alloc.allocate(0); }), ErrorCode::kUsage);
}

TEST(Net, ListenerPicksEphemeralPort) {
  Listener l({"127.0.0.1", 0});
  EXPECT_NE(l.address().port, 0);
  EXPECT_EQ(l.address().host, "127.0.0.1");
}

TEST(Net, ConnectionIsFifoAndCountsFrames) {
  Listener l({"127.0.0.1", 0});
  FrameCounters client_counters, server_counters;
  auto accepted = std::async(std::launch::async, [&] { return l.accept(); });
  Connection client(connect_to(l.address()), "client", &client_counters);
  Connection server(accepted.get(), "server", &server_counters);

  constexpr int kFrames = 2000;
  std::promise<void> all_in;
  std::vector<std::int32_t> got;
  server.start(
      [&](Frame f) {
        const auto m = decode_user_message(f.body);
        got.push_back(decode_as<std::int32_t>(m.envelope.payload));
        if (got.size() == kFrames) all_in.set_value();
      },
      nullptr);
  client.start([](Frame) {}, nullptr);
  for (std::int32_t i = 0; i < kFrames; ++i) {
    client.send(FrameKind::kUserMsg,
                encode_user_message(UserMessage{1, Envelope{0, 0, 1, 0, encode(i)}}));
  }
  ASSERT_EQ(all_in.get_future().wait_for(10s), std::future_status::ready);
  for (std::int32_t i = 0; i < kFrames; ++i) ASSERT_EQ(got[i], i);
  EXPECT_EQ(client_counters.sent(FrameKind::kUserMsg), static_cast<std::uint64_t>(kFrames));
  EXPECT_EQ(server_counters.received(FrameKind::kUserMsg), static_cast<std::uint64_t>(kFrames));
  EXPECT_EQ(client_counters.sent(FrameKind::kAddrReq), 0u);
  client.close();
  server.close();
}

TEST(Net, PeerCloseIsReportedCleanly) {
  Listener l({"127.0.0.1", 0});
  auto accepted = std::async(std::launch::async, [&] { return l.accept(); });
  auto client = std::make_unique<Connection>(connect_to(l.address()), "client", nullptr);
  Connection server(accepted.get(), "server", nullptr);
  std::promise<std::optional<Error>> closed;
  server.start([](Frame) {}, [&](std::optional<Error> err) { closed.set_value(std::move(err)); });
  client->send_now(FrameKind::kJobDone, encode_job_done(1));
  client.reset();
  auto fut = closed.get_future();
  ASSERT_EQ(fut.wait_for(5s), std::future_status::ready);
  EXPECT_FALSE(fut.get().has_value());
  server.close();
}

TEST(Net, GarbageOnTheStreamClosesWithProtocolError) {
  Listener l({"127.0.0.1", 0});
  auto accepted = std::async(std::launch::async, [&] { return l.accept(); });
  Socket raw = connect_to(l.address());
  Connection server(accepted.get(), "server", nullptr);
  std::promise<std::optional<Error>> closed;
  server.start([](Frame) {}, [&](std::optional<Error> err) { closed.set_value(std::move(err)); });
  const Bytes junk(12, 0x00);
  raw.send_all(junk);
  auto fut = closed.get_future();
  ASSERT_EQ(fut.wait_for(5s), std::future_status::ready);
  auto err = fut.get();
  ASSERT_TRUE(err.has_value());
  EXPECT_EQ(err->code(), ErrorCode::kProtocol);
  server.close();
}

TEST(Net, ConnectToNothingFails) {
  Address dead;
  {
    Listener l({"127.0.0.1", 0});
    dead = l.address();
  }
  EXPECT_EQ(code_of([&] { connect_to(dead, 2); }), ErrorCode::kTransportFailure);
}
