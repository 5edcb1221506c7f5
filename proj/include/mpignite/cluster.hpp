#pragma once

#include <atomic>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "mpignite/net.hpp"
#include "mpignite/runtime.hpp"

namespace mpignite {

struct MasterOptions {
  Address listen{"127.0.0.1", 0};
};

/// The driver process of a cluster. Accepts workers, assigns ranks
/// round-robin, keeps the address directory, allocates context ids and, in
/// relay mode, forwards user messages between workers.
class Master final : public Backend {
 public:
  Master(const FunctionRegistry& registry, MasterOptions options);
  ~Master() override;

  Master(const Master&) = delete;
  Master& operator=(const Master&) = delete;

  const Address& address() const { return listener_.address(); }

  // Throws kTransportFailure if fewer than `count` workers registered in time.
  void wait_for_workers(std::size_t count, std::chrono::milliseconds timeout);
  std::size_t worker_count() const;

  // One job at a time; throws kUsage while another job is running.
  JobHandle submit(const ParallelFunction& fn, std::uint32_t n,
                   const JobOptions& options) override;

  // Sends SHUTDOWN to every worker and closes all connections.
  void shutdown();

  const FrameCounters& counters() const { return counters_; }

 private:
  struct WorkerRecord {
    WorkerId id = 0;
    Address address;
    std::shared_ptr<Connection> conn;
  };
  struct ActiveJob {
    std::shared_ptr<JobState> state;
    RankMap directory;  // full addresses
    bool done_sent = false;
  };

  void accept_loop();
  void on_frame(const std::shared_ptr<Connection>& conn, WorkerId& who, Frame frame);
  void on_close(WorkerId who, const std::optional<Error>& err);
  void handle_result(const RankResult& r);
  void finish_job_locked();  // sends JOB_DONE once
  std::shared_ptr<Connection> connection_of(WorkerId id);

  const FunctionRegistry& registry_;
  Listener listener_;
  FrameCounters counters_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<WorkerId, WorkerRecord> workers_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::optional<ActiveJob> job_;
  WorkerId next_worker_ = 1;
  JobId next_job_ = 1;
  ContextAllocator contexts_;
  bool shut_down_ = false;

  std::thread acceptor_;
};

struct WorkerOptions {
  Address master;
  Address listen{"127.0.0.1", 0};
  std::size_t callback_threads = 2;
};

/// A long-running worker: hosts assigned ranks as threads, receives their
/// messages, and opens peer connections lazily on first send.
class Worker {
 public:
  Worker(const FunctionRegistry& registry, WorkerOptions options);
  ~Worker();

  Worker(const Worker&) = delete;
  Worker& operator=(const Worker&) = delete;

  // Connects to the master and completes the HELLO handshake.
  void start();
  // Blocks until SHUTDOWN (returns 0) or loss of the master (returns 1).
  int wait();
  int run() {
    start();
    return wait();
  }
  // Local stop, as if SHUTDOWN had arrived.
  void stop();

  WorkerId id() const { return id_; }
  const Address& listen_address() const { return listener_.address(); }
  const FrameCounters& counters() const { return counters_; }
  FrameCounters& counters() { return counters_; }
  std::size_t cached_endpoints() const;

  class Job;

 private:
  friend class Job;

  void on_master_frame(Frame frame);
  void on_master_close(const std::optional<Error>& err);
  void accept_loop();
  void on_peer_frame(WorkerId& peer, Frame frame);

  void handle_task(JobSpec spec);
  void handle_job_done(JobId job);
  void route_inbound(const UserMessage& msg);
  std::shared_ptr<Job> job_for(JobId id, bool create);

  std::shared_ptr<Connection> resolve_endpoint(const Job& job, WorldRank dst);
  ContextId allocate_contexts(std::uint32_t count);
  void send_to_master(FrameKind kind, const Bytes& body);
  void fail_pending(const Error& err);
  void retire_jobs();

  const FunctionRegistry& registry_;
  WorkerOptions options_;
  Listener listener_;
  FrameCounters counters_;
  CallbackExecutor callbacks_;
  WorkerId id_ = 0;

  std::shared_ptr<Connection> master_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<JobId, std::shared_ptr<Job>> jobs_;
  std::vector<std::shared_ptr<Job>> retired_;
  JobId last_finished_ = 0;

  std::map<WorkerId, std::shared_ptr<Connection>> endpoints_;
  std::map<WorkerId, std::shared_future<std::shared_ptr<Connection>>> resolving_;
  std::map<WorldRank, std::promise<RankMapEntry>> addr_waiters_;
  std::map<std::uint64_t, std::promise<CtxAllocReply>> ctx_waiters_;
  std::uint64_t next_request_ = 1;
  std::vector<std::shared_ptr<Connection>> inbound_;
  std::optional<Error> pending_failure_;

  bool stopping_ = false;
  int exit_code_ = 0;
  bool cleaned_ = false;
  std::thread acceptor_;
};

/// A master and `workers` workers in this process, talking over loopback
/// TCP exactly as separate processes would.
class LoopbackCluster {
 public:
  LoopbackCluster(const FunctionRegistry& registry, std::size_t workers);
  ~LoopbackCluster();

  LoopbackCluster(const LoopbackCluster&) = delete;
  LoopbackCluster& operator=(const LoopbackCluster&) = delete;

  Master& master() { return *master_; }
  Worker& worker(std::size_t i) { return *workers_.at(i); }
  std::size_t size() const { return workers_.size(); }

  // Sum of the frames every worker sent, by kind.
  std::uint64_t worker_frames_sent(FrameKind kind) const;
  void reset_counters();

 private:
  std::unique_ptr<Master> master_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<std::thread> threads_;
};

}  // namespace mpignite
