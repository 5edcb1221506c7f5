#include "mpignite/comm.hpp"

#include <algorithm>
#include <map>

#include "mpignite/log.hpp"

namespace mpignite {

namespace {

constexpr std::int32_t kOptOut = -1;

struct SplitRequest {
  std::int32_t color;
  std::int32_t key;
  int parent_rank;
};

}  // namespace

Communicator::Communicator(std::shared_ptr<const ProcessEnv> env, ContextId context,
                           std::vector<WorldRank> local_to_world, int my_rank)
    : env_(std::move(env)),
      context_(context),
      local_to_world_(std::move(local_to_world)),
      my_rank_(my_rank) {}

Communicator Communicator::world(std::shared_ptr<const ProcessEnv> env) {
  if (!env || !env->transport || !env->mailbox) {
    throw Error(ErrorCode::kUsage, "process environment lacks a transport or mailbox");
  }
  if (env->world_rank >= env->world_size) {
    throw Error(ErrorCode::kInvalidRank, "world rank outside world size");
  }
  std::vector<WorldRank> identity(env->world_size);
  for (WorldRank r = 0; r < env->world_size; ++r) identity[r] = r;
  const int me = static_cast<int>(env->world_rank);
  return Communicator(std::move(env), kWorldContext, std::move(identity), me);
}

WorldRank Communicator::world_rank_of(int local_rank) const {
  check_rank(local_rank, "rank");
  return local_to_world_[static_cast<std::size_t>(local_rank)];
}

void Communicator::check_rank(int r, const char* what) const {
  if (r < 0 || r >= size()) {
    throw Error(ErrorCode::kInvalidRank, std::string(what) + " " + std::to_string(r) +
                                             " outside communicator of size " +
                                             std::to_string(size()));
  }
}

void Communicator::check_user_tag(int tag) {
  if (tag < 0) {
    throw Error(ErrorCode::kInvalidTag,
                "tag " + std::to_string(tag) + " is negative; negative tags are reserved");
  }
}

void Communicator::send_payload(int dst, std::int32_t tag, Payload payload) {
  check_rank(dst, "destination");
  env_->transport->deliver(Envelope{context_, local_to_world_[static_cast<std::size_t>(my_rank_)],
                                    local_to_world_[static_cast<std::size_t>(dst)], tag,
                                    std::move(payload)});
}

ReceiveTicket Communicator::post_receive(int src, std::int32_t tag) {
  check_rank(src, "source");
  return env_->mailbox->receive_async(
      MatchKey{context_, local_to_world_[static_cast<std::size_t>(src)], tag});
}

Payload Communicator::receive_payload(int src, std::int32_t tag) {
  return post_receive(src, tag).await();
}

void Communicator::send(int dst, int tag, const Value& value) {
  check_user_tag(tag);
  check_rank(dst, "destination");
  send_payload(dst, tag, encode(value));
}

Value Communicator::receive(int src, int tag, Kind expected) {
  check_user_tag(tag);
  return decode(receive_payload(src, tag), expected);
}

Future<Value> Communicator::receive_async(int src, int tag, Kind expected) {
  check_user_tag(tag);
  return Future<Value>(post_receive(src, tag), expected);
}

std::optional<Communicator> Communicator::split(std::int32_t color, std::int32_t key) {
  if (color < kOptOut) {
    throw Error(ErrorCode::kUsage, "split color must be >= 0 or -1 (opt out), got " +
                                       std::to_string(color));
  }
  ++split_epoch_;
  constexpr int kRoot = 0;
  send_payload(kRoot, internal_tag::kSplitGather,
               encode(std::vector<std::int64_t>{color, key}));

  if (my_rank_ == kRoot) {
    std::vector<SplitRequest> requests;
    requests.reserve(local_to_world_.size());
    const auto deadline = Clock::now() + env_->split_timeout;
    for (int r = 0; r < size(); ++r) {
      auto p = env_->mailbox->receive_until(
          MatchKey{context_, local_to_world_[static_cast<std::size_t>(r)],
                   internal_tag::kSplitGather},
          deadline);
      if (!p) {
        throw Error(ErrorCode::kSplitProtocol,
                    "split epoch " + std::to_string(split_epoch_) + ": rank " +
                        std::to_string(r) + " never joined the split");
      }
      const auto ck = decode_as<std::vector<std::int64_t>>(*p);
      if (ck.size() != 2) throw Error(ErrorCode::kSplitProtocol, "malformed split request");
      requests.push_back({static_cast<std::int32_t>(ck[0]), static_cast<std::int32_t>(ck[1]), r});
    }

    std::map<std::int32_t, std::vector<SplitRequest>> groups;
    for (const auto& req : requests) {
      if (req.color != kOptOut) groups[req.color].push_back(req);
    }
    ContextId next_id = 0;
    if (!groups.empty()) {
      next_id = env_->transport->allocate_contexts(static_cast<std::uint32_t>(groups.size()));
    }
    std::vector<std::vector<std::int64_t>> replies(local_to_world_.size());
    for (auto& [color, members] : groups) {
      std::stable_sort(members.begin(), members.end(),
                       [](const SplitRequest& a, const SplitRequest& b) {
                         return a.key != b.key ? a.key < b.key : a.parent_rank < b.parent_rank;
                       });
      std::vector<std::int64_t> reply;
      reply.reserve(members.size() + 1);
      reply.push_back(static_cast<std::int64_t>(next_id++));
      for (const auto& m : members) {
        reply.push_back(local_to_world_[static_cast<std::size_t>(m.parent_rank)]);
      }
      for (const auto& m : members) replies[static_cast<std::size_t>(m.parent_rank)] = reply;
    }
    for (int r = 0; r < size(); ++r) {
      send_payload(r, internal_tag::kSplitReply, encode(replies[static_cast<std::size_t>(r)]));
    }
  }

  const auto reply = decode_as<std::vector<std::int64_t>>(
      receive_payload(kRoot, internal_tag::kSplitReply));
  if (reply.empty()) return std::nullopt;

  std::vector<WorldRank> members;
  members.reserve(reply.size() - 1);
  const WorldRank me = local_to_world_[static_cast<std::size_t>(my_rank_)];
  int my_new_rank = -1;
  for (std::size_t i = 1; i < reply.size(); ++i) {
    const auto w = static_cast<WorldRank>(reply[i]);
    if (w == me) my_new_rank = static_cast<int>(i - 1);
    members.push_back(w);
  }
  if (my_new_rank < 0) {
    throw Error(ErrorCode::kSplitProtocol, "split reply does not include this process");
  }
  log::debug("event=split color={} key={} context={} new-rank={} size={}", color, key,
             reply[0], my_new_rank, members.size());
  return Communicator(env_, static_cast<ContextId>(reply[0]), std::move(members), my_new_rank);
}

Value Communicator::broadcast(int root, const std::optional<Value>& value, Kind expected) {
  check_rank(root, "root");
  if (my_rank_ == root && !value) {
    throw Error(ErrorCode::kUsage, "broadcast root must supply a value");
  }
  if (my_rank_ != root && value) {
    throw Error(ErrorCode::kUsage, "only the broadcast root may supply a value");
  }
  if (my_rank_ == root) {
    if (kind_of(*value) != expected) {
      throw Error(ErrorCode::kTypeMismatch, "broadcast value is " +
                                                std::string(to_string(kind_of(*value))) +
                                                ", expected " + std::string(to_string(expected)));
    }
    const auto payload = encode(*value);
    for (int r = 0; r < size(); ++r) {
      if (r != root) send_payload(r, internal_tag::kBroadcast, payload);
    }
    return *value;
  }
  return decode(receive_payload(root, internal_tag::kBroadcast), expected);
}

Value Communicator::all_reduce(const Value& value, const ReduceFn& f) {
  if (size() == 1) return value;
  constexpr int kRoot = 0;
  const Kind kind = kind_of(value);
  if (my_rank_ != kRoot) {
    send_payload(kRoot, internal_tag::kReduceGather, encode(value));
    return decode(receive_payload(kRoot, internal_tag::kReduceResult), kind);
  }
  Value acc = value;
  for (int r = 1; r < size(); ++r) {
    acc = f(acc, decode(receive_payload(r, internal_tag::kReduceGather), kind));
  }
  if (kind_of(acc) != kind) {
    throw Error(ErrorCode::kTypeMismatch, "reduction function changed the value kind");
  }
  const auto payload = encode(acc);
  for (int r = 1; r < size(); ++r) send_payload(r, internal_tag::kReduceResult, payload);
  return acc;
}

}  // namespace mpignite
