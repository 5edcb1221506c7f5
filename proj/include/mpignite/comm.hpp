#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "mpignite/codec.hpp"
#include "mpignite/mailbox.hpp"
#include "mpignite/transport.hpp"

namespace mpignite {

// Tags below zero carry protocol traffic and are rejected on the user API.
namespace internal_tag {
inline constexpr std::int32_t kSplitGather = -1;
inline constexpr std::int32_t kSplitReply = -2;
inline constexpr std::int32_t kBroadcast = -3;
inline constexpr std::int32_t kReduceGather = -4;
inline constexpr std::int32_t kReduceResult = -5;
}  // namespace internal_tag

/// What a logical process needs from the runtime hosting it.
struct ProcessEnv {
  WorldRank world_rank = 0;
  std::uint32_t world_size = 1;
  Transport* transport = nullptr;
  Mailbox* mailbox = nullptr;
  std::optional<Payload> parameter;
  std::chrono::milliseconds split_timeout{30000};
};

/// Typed view of a ReceiveTicket: decodes the payload on access.
template <class T>
class Future {
 public:
  Future(ReceiveTicket ticket, Kind kind) : ticket_(std::move(ticket)), kind_(kind) {}

  bool ready() const { return ticket_.ready(); }

  T await() const { return extract(ticket_.await()); }

  // Exactly one of the two callbacks runs, on the runtime's callback
  // executor, once the ticket settles.
  void on_complete(std::function<void(const T&)> on_success,
                   std::function<void(const Error&)> on_failure = {}) const {
    ticket_.on_complete([kind = kind_, on_success = std::move(on_success),
                         on_failure = std::move(on_failure)](const ReceiveTicket& t) {
      try {
        auto value = Future(t, kind).await();
        if (on_success) on_success(value);
      } catch (const Error& e) {
        if (on_failure) on_failure(e);
      }
    });
  }

  const ReceiveTicket& ticket() const { return ticket_; }

 private:
  T extract(const Payload& p) const {
    if constexpr (std::is_same_v<T, Value>) {
      return decode(p, kind_);
    } else {
      return std::get<T>(decode(p, kind_));
    }
  }

  ReceiveTicket ticket_;
  Kind kind_;
};

// Blocking wait, the counterpart of MPI_Wait.
template <class T>
T await_result(const Future<T>& f) {
  return f.await();
}

using ReduceFn = std::function<Value(const Value&, const Value&)>;

/// A process group handle. Each logical process owns its own instances;
/// every member of a group shares the context id and rank ordering.
class Communicator {
 public:
  // The world communicator of the process described by `env`.
  static Communicator world(std::shared_ptr<const ProcessEnv> env);

  int rank() const { return my_rank_; }
  int size() const { return static_cast<int>(local_to_world_.size()); }
  ContextId context_id() const { return context_; }
  std::uint32_t split_epoch() const { return split_epoch_; }
  WorldRank world_rank_of(int local_rank) const;
  const std::vector<WorldRank>& members() const { return local_to_world_; }

  // Optional per-job argument supplied at submit time.
  const std::optional<Payload>& job_parameter() const { return env_->parameter; }

  void send(int dst, int tag, const Value& value);
  Value receive(int src, int tag, Kind expected);
  Future<Value> receive_async(int src, int tag, Kind expected);

  template <Encodable T>
  void send(int dst, int tag, const T& value) {
    send(dst, tag, Value{std::in_place_type<T>, value});
  }
  template <Encodable T>
  T receive(int src, int tag) {
    return std::get<T>(receive(src, tag, KindOf<T>::value));
  }
  template <Encodable T>
  Future<T> receive_async(int src, int tag) {
    return Future<T>(post_receive(src, tag), KindOf<T>::value);
  }

  // Collective over this communicator. color -1 opts out (returns nullopt).
  std::optional<Communicator> split(std::int32_t color, std::int32_t key);

  // Collective; exactly the root passes a value.
  Value broadcast(int root, const std::optional<Value>& value, Kind expected);
  template <Encodable T>
  T broadcast(int root, const std::optional<T>& value = std::nullopt) {
    std::optional<Value> v;
    if (value) v.emplace(std::in_place_type<T>, *value);
    return std::get<T>(broadcast(root, v, KindOf<T>::value));
  }

  // Collective; every member gets f(...f(f(v0, v1), v2)..., v_{size-1}).
  Value all_reduce(const Value& value, const ReduceFn& f);
  template <Encodable T, class F>
  T all_reduce(const T& value, F f) {
    return std::get<T>(all_reduce(Value{std::in_place_type<T>, value},
                                  [&f](const Value& a, const Value& b) {
                                    return Value{std::in_place_type<T>,
                                                 f(std::get<T>(a), std::get<T>(b))};
                                  }));
  }

 private:
  Communicator(std::shared_ptr<const ProcessEnv> env, ContextId context,
               std::vector<WorldRank> local_to_world, int my_rank);

  void check_rank(int r, const char* what) const;
  static void check_user_tag(int tag);

  void send_payload(int dst, std::int32_t tag, Payload payload);
  Payload receive_payload(int src, std::int32_t tag);
  ReceiveTicket post_receive(int src, std::int32_t tag);

  std::shared_ptr<const ProcessEnv> env_;
  ContextId context_;
  std::vector<WorldRank> local_to_world_;
  int my_rank_;
  std::uint32_t split_epoch_ = 0;
};

}  // namespace mpignite
