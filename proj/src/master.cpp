#include "mpignite/cluster.hpp"

#include "mpignite/log.hpp"

namespace mpignite {

Master::Master(const FunctionRegistry& registry, MasterOptions options)
    : registry_(registry), listener_(options.listen) {
  acceptor_ = std::thread([this] { accept_loop(); });
  log::info("event=master-listening address={}", listener_.address().to_string());
}

Master::~Master() { shutdown(); }

void Master::accept_loop() {
  log::set_role("master");
  for (;;) {
    Socket sock;
    try {
      sock = listener_.accept();
    } catch (const Error& e) {
      log::error("event=accept-failed what=\"{}\"", e.what());
      return;
    }
    if (!sock.valid()) return;
    auto conn = std::make_shared<Connection>(std::move(sock), "worker", &counters_);
    auto who = std::make_shared<WorkerId>(0);
    {
      std::lock_guard lock(mu_);
      if (shut_down_) return;
      connections_.push_back(conn);
    }
    Connection* raw = conn.get();
    conn->start(
        [this, raw, who](Frame f) {
          std::shared_ptr<Connection> self;
          {
            std::lock_guard lock(mu_);
            for (auto& c : connections_) {
              if (c.get() == raw) self = c;
            }
          }
          if (self) on_frame(self, *who, std::move(f));
        },
        [this, who](const std::optional<Error>& err) { on_close(*who, err); });
  }
}

std::size_t Master::worker_count() const {
  std::lock_guard lock(mu_);
  return workers_.size();
}

void Master::wait_for_workers(std::size_t count, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return workers_.size() >= count; })) {
    throw Error(ErrorCode::kTransportFailure,
                "only " + std::to_string(workers_.size()) + " of " + std::to_string(count) +
                    " workers registered in time");
  }
}

std::shared_ptr<Connection> Master::connection_of(WorkerId id) {
  auto it = workers_.find(id);
  return it == workers_.end() ? nullptr : it->second.conn;
}

void Master::on_frame(const std::shared_ptr<Connection>& conn, WorkerId& who, Frame frame) {
  log::set_role("master");
  switch (frame.kind) {
    case FrameKind::kHello: {
      auto hello = decode_hello(frame.body);
      Address addr = hello.listen;
      if (addr.host.empty() || addr.host == "0.0.0.0") addr.host = conn->peer_host();
      {
        std::lock_guard lock(mu_);
        who = next_worker_++;
        workers_[who] = WorkerRecord{who, addr, conn};
      }
      conn->send(FrameKind::kHello, encode_hello(Hello{who, {}}));
      log::info("event=worker-registered worker={} address={}", who, addr.to_string());
      cv_.notify_all();
      return;
    }
    case FrameKind::kResult:
      handle_result(decode_result(frame.body));
      return;
    case FrameKind::kUserMsg: {
      const auto msg = decode_user_message(frame.body);
      std::shared_ptr<Connection> target;
      {
        std::lock_guard lock(mu_);
        if (!job_ || job_->state->id() != msg.job || job_->state->complete()) {
          log::debug("event=relay-drop job={} dst={}", msg.job, msg.envelope.dst);
          return;
        }
        if (msg.envelope.dst >= job_->directory.entries.size()) {
          log::warn("event=relay-unroutable dst={}", msg.envelope.dst);
          return;
        }
        target = connection_of(job_->directory.worker_of(msg.envelope.dst));
      }
      if (target) target->send(FrameKind::kUserMsg, frame.body);
      return;
    }
    case FrameKind::kAddrReq: {
      const auto rank = decode_addr_request(frame.body);
      RankMapEntry entry{rank, 0, {}};
      {
        std::lock_guard lock(mu_);
        if (job_ && rank < job_->directory.entries.size()) {
          entry = job_->directory.entries[rank];
        }
      }
      log::debug("event=addr-lookup from={} rank={} worker={}", who, rank, entry.worker);
      conn->send(FrameKind::kAddrReply, encode_addr_reply(entry));
      return;
    }
    case FrameKind::kCtxAllocReq: {
      const auto req = decode_ctx_request(frame.body);
      CtxAllocReply reply{req.request, 0, 0};
      if (req.count > 0) {
        reply.first = contexts_.allocate(req.count);
        reply.count = req.count;
      }
      conn->send(FrameKind::kCtxAllocReply, encode_ctx_reply(reply));
      return;
    }
    default:
      throw Error(ErrorCode::kProtocol,
                  "unexpected " + std::string(to_string(frame.kind)) + " frame at master");
  }
}

void Master::handle_result(const RankResult& r) {
  std::lock_guard lock(mu_);
  if (!job_ || job_->state->id() != r.job) {
    log::warn("event=stale-result job={} rank={}", r.job, r.rank);
    return;
  }
  bool first_failure = false;
  if (r.status == ResultStatus::kOk) {
    job_->state->record_result(r.rank, r.value);
  } else {
    first_failure = job_->state->record_failure(r.rank, r.error, r.message);
  }
  if (first_failure || job_->state->complete()) finish_job_locked();
}

void Master::finish_job_locked() {
  if (!job_ || job_->done_sent) return;
  job_->done_sent = true;
  const auto body = encode_job_done(job_->state->id());
  for (auto& [id, w] : workers_) {
    try {
      w.conn->send(FrameKind::kJobDone, body);
    } catch (const Error& e) {
      log::debug("event=job-done-send-failed worker={} what=\"{}\"", id, e.what());
    }
  }
}

void Master::on_close(WorkerId who, const std::optional<Error>& err) {
  std::lock_guard lock(mu_);
  if (who == 0) return;
  workers_.erase(who);
  if (shut_down_) return;
  if (err) {
    log::warn("event=worker-lost worker={} what=\"{}\"", who, err->what());
  } else {
    log::warn("event=worker-lost worker={}", who);
  }
  if (!job_ || job_->state->complete()) return;
  bool first_failure = false;
  for (auto rank : job_->state->outstanding()) {
    if (job_->directory.worker_of(rank) == who) {
      first_failure |= job_->state->record_failure(
          rank, ErrorCode::kTransportFailure,
          "worker " + std::to_string(who) + " disconnected");
    }
  }
  if (first_failure || job_->state->complete()) finish_job_locked();
}

JobHandle Master::submit(const ParallelFunction& fn, std::uint32_t n, const JobOptions& options) {
  if (n == 0) throw Error(ErrorCode::kUsage, "execute needs at least one process");
  if (fn.name.empty() || !registry_.contains(fn.name)) {
    throw Error(ErrorCode::kRegistry,
                "cluster jobs need a registered function; '" + fn.name + "' is not registered");
  }
  std::lock_guard lock(mu_);
  if (shut_down_) throw Error(ErrorCode::kUsage, "master is shut down");
  if (job_ && !job_->state->complete()) {
    throw Error(ErrorCode::kUsage, "a job is already running");
  }
  if (workers_.empty()) throw Error(ErrorCode::kUsage, "no workers registered");

  std::vector<const WorkerRecord*> order;
  for (const auto& [id, w] : workers_) order.push_back(&w);

  const JobId id = next_job_++;
  ActiveJob job{std::make_shared<JobState>(id, n), {}, false};
  std::map<WorkerId, std::vector<WorldRank>> assigned;
  JobSpec spec;
  spec.job = id;
  spec.function = fn.name;
  spec.world_size = n;
  spec.routing = options.routing;
  spec.parameter = options.parameter;
  for (WorldRank r = 0; r < n; ++r) {
    const auto* w = order[r % order.size()];
    job.directory.entries.push_back(RankMapEntry{r, w->id, w->address});
    spec.rank_map.entries.push_back(RankMapEntry{r, w->id, {}});
    assigned[w->id].push_back(r);
  }
  job_ = std::move(job);
  log::info("event=job-submit job={} function={} n={} workers={} routing={}", id, fn.name, n,
            order.size(), to_string(options.routing));
  for (auto& [wid, ranks] : assigned) {
    spec.assigned = ranks;
    try {
      workers_.at(wid).conn->send(FrameKind::kTaskAssign, encode_job_spec(spec));
    } catch (const Error& e) {
      for (auto r : ranks) {
        job_->state->record_failure(r, ErrorCode::kTransportFailure, e.what());
      }
    }
  }
  if (job_->state->failed()) finish_job_locked();
  return JobHandle(job_->state);
}

void Master::shutdown() {
  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(mu_);
    if (shut_down_) return;
    shut_down_ = true;
    for (auto& [id, w] : workers_) {
      try {
        w.conn->send(FrameKind::kShutdown, {});
      } catch (const Error&) {
      }
    }
    conns = connections_;
  }
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  for (auto& c : conns) c->close();
  log::info("event=master-shutdown");
}

}  // namespace mpignite
