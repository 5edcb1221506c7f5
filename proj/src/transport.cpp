#include "mpignite/transport.hpp"

namespace mpignite {

ContextId ContextAllocator::allocate(std::uint32_t count) {
  if (count == 0) {
    throw Error(ErrorCode::kUsage, "context allocation needs a positive count");
  }
  return next_.fetch_add(count);
}

LocalTransport::LocalTransport(std::uint32_t n, CallbackExecutor* executor,
                               std::size_t watermark) {
  if (n == 0) throw Error(ErrorCode::kUsage, "local transport needs at least one process");
  mailboxes_.reserve(n);
  for (WorldRank r = 0; r < n; ++r) {
    mailboxes_.push_back(std::make_unique<Mailbox>(r, executor, watermark));
  }
}

void LocalTransport::deliver(Envelope env) {
  mailbox(env.dst).enqueue(std::move(env));
}

ContextId LocalTransport::allocate_contexts(std::uint32_t count) {
  return contexts_.allocate(count);
}

Mailbox& LocalTransport::mailbox(WorldRank rank) {
  if (rank >= mailboxes_.size()) {
    throw Error(ErrorCode::kRouting, "no rank " + std::to_string(rank) + " in a world of " +
                                         std::to_string(mailboxes_.size()));
  }
  return *mailboxes_[rank];
}

void LocalTransport::abort(ErrorCode code, const std::string& reason) {
  for (auto& mb : mailboxes_) mb->abort(code, reason);
}

}  // namespace mpignite
