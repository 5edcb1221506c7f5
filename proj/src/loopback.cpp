#include "mpignite/cluster.hpp"

namespace mpignite {

LoopbackCluster::LoopbackCluster(const FunctionRegistry& registry, std::size_t workers)
    : master_(std::make_unique<Master>(registry, MasterOptions{})) {
  for (std::size_t i = 0; i < workers; ++i) {
    auto w = std::make_unique<Worker>(registry, WorkerOptions{master_->address()});
    w->start();
    Worker* raw = w.get();
    workers_.push_back(std::move(w));
    threads_.emplace_back([raw] { raw->wait(); });
  }
  master_->wait_for_workers(workers, std::chrono::seconds(10));
}

LoopbackCluster::~LoopbackCluster() {
  master_->shutdown();
  for (auto& t : threads_) t.join();
  workers_.clear();
  master_.reset();
}

std::uint64_t LoopbackCluster::worker_frames_sent(FrameKind kind) const {
  std::uint64_t total = 0;
  for (const auto& w : workers_) total += w->counters().sent(kind);
  return total;
}

void LoopbackCluster::reset_counters() {
  for (auto& w : workers_) w->counters().reset();
}

}  // namespace mpignite
