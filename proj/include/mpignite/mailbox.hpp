#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

#include "mpignite/wire.hpp"

namespace mpignite {

using Clock = std::chrono::steady_clock;

/// Runtime-internal execution context for ticket callbacks. Callbacks never
/// run on the logical process that posted the receive, nor on a transport
/// reader thread.
class CallbackExecutor {
 public:
  explicit CallbackExecutor(std::size_t threads = 1);
  ~CallbackExecutor();

  CallbackExecutor(const CallbackExecutor&) = delete;
  CallbackExecutor& operator=(const CallbackExecutor&) = delete;

  void post(std::function<void()> fn);
  // Blocks until every posted callback has finished.
  void drain();

 private:
  void run();

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  std::size_t running_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

namespace detail {
struct TicketState;
}

/// Read-only placeholder for a message that may not have arrived yet.
/// Completes exactly once, either with a payload or with a failure.
class ReceiveTicket {
 public:
  enum class State { kPending, kCompleted, kFailed };

  ReceiveTicket() = default;
  explicit ReceiveTicket(std::shared_ptr<detail::TicketState> state)
      : state_(std::move(state)) {}

  State state() const;
  bool ready() const { return state() != State::kPending; }

  // Blocks until completion. Throws the failure (receive-aborted) if failed.
  Payload await() const;
  // nullopt on timeout; throws if failed.
  std::optional<Payload> await_until(Clock::time_point deadline) const;

  // Runs `fn` once, on the callback executor, after completion. The callback
  // receives this ticket, which is ready by then.
  void on_complete(std::function<void(const ReceiveTicket&)> fn) const;

  bool valid() const { return state_ != nullptr; }

 private:
  friend class Mailbox;
  std::shared_ptr<detail::TicketState> state_;
};

struct MatchKey {
  ContextId context = 0;
  WorldRank src = 0;
  std::int32_t tag = 0;

  bool operator==(const MatchKey&) const = default;
};

struct MatchKeyHash {
  std::size_t operator()(const MatchKey& k) const noexcept;
};

/// Receiver-side buffer for one logical process. Unmatched messages wait in
/// `buffered`, unmatched receives wait in `pending`; matching is exact on
/// (context, src, tag) and earliest-first on both sides.
class Mailbox {
 public:
  static constexpr std::size_t kDefaultWatermark = 1u << 16;

  explicit Mailbox(WorldRank owner, CallbackExecutor* executor = nullptr,
                   std::size_t watermark = kDefaultWatermark);

  Mailbox(const Mailbox&) = delete;
  Mailbox& operator=(const Mailbox&) = delete;

  WorldRank owner() const { return owner_; }

  void enqueue(Envelope env);

  Payload receive(const MatchKey& key);
  ReceiveTicket receive_async(const MatchKey& key);
  // Withdraws the posted receive on timeout, so a late message stays buffered.
  std::optional<Payload> receive_until(const MatchKey& key, Clock::time_point deadline);

  // Fails all pending receives and every later one with `code`; later
  // enqueues are dropped.
  void abort(ErrorCode code, const std::string& reason);
  bool aborted() const;

  std::size_t buffered_count() const;
  std::size_t pending_count() const;
  std::uint64_t enqueued_total() const;

 private:
  bool withdraw(const std::shared_ptr<detail::TicketState>& ticket);

  const WorldRank owner_;
  CallbackExecutor* executor_;
  const std::size_t watermark_;

  mutable std::mutex mu_;
  std::unordered_map<MatchKey, std::deque<Payload>, MatchKeyHash> buffered_;
  std::unordered_map<MatchKey, std::deque<std::shared_ptr<detail::TicketState>>, MatchKeyHash>
      pending_;
  std::size_t buffered_count_ = 0;
  std::size_t pending_count_ = 0;
  std::uint64_t enqueued_total_ = 0;
  bool above_watermark_ = false;
  std::optional<Error> abort_error_;
};

}  // namespace mpignite
