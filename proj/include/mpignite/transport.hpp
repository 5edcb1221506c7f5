#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include "mpignite/mailbox.hpp"
#include "mpignite/net.hpp"

namespace mpignite {

/// Moves Envelopes between logical processes of one job. deliver() never
/// waits for the receiver; per (src, dst) pair, envelopes reach the
/// destination mailbox in the order deliver() was called.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual void deliver(Envelope env) = 0;
  // Reserves `count` consecutive, never-before-issued context ids and
  // returns the first.
  virtual ContextId allocate_contexts(std::uint32_t count) = 0;
  virtual std::uint32_t world_size() const = 0;
  virtual const FrameCounters& counters() const = 0;
};

// Monotonic context-id source. Id 0 belongs to the world communicator and is
// never issued.
class ContextAllocator {
 public:
  ContextId allocate(std::uint32_t count);

 private:
  std::atomic<ContextId> next_{1};
};

/// In-memory transport for local mode: deliver is a direct enqueue into the
/// destination mailbox, and no frame is ever emitted.
class LocalTransport final : public Transport {
 public:
  explicit LocalTransport(std::uint32_t n, CallbackExecutor* executor = nullptr,
                          std::size_t watermark = Mailbox::kDefaultWatermark);

  void deliver(Envelope env) override;
  ContextId allocate_contexts(std::uint32_t count) override;
  std::uint32_t world_size() const override {
    return static_cast<std::uint32_t>(mailboxes_.size());
  }
  const FrameCounters& counters() const override { return counters_; }

  Mailbox& mailbox(WorldRank rank);
  void abort(ErrorCode code, const std::string& reason);

 private:
  std::vector<std::unique_ptr<Mailbox>> mailboxes_;
  ContextAllocator contexts_;
  FrameCounters counters_;
};

}  // namespace mpignite
