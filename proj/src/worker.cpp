#include "mpignite/cluster.hpp"

#include <algorithm>

#include "mpignite/log.hpp"

namespace mpignite {

/// Per-job state on a worker. Doubles as the Transport handed to the job's
/// logical processes. Mailboxes are created on first use, so messages that
/// beat the TASK_ASSIGN frame are kept.
class Worker::Job final : public Transport {
 public:
  Job(Worker& worker, JobId id) : worker_(worker), id_(id) {}

  ~Job() override { join(); }

  JobId id() const { return id_; }

  void assign(JobSpec spec) {
    std::lock_guard lock(mu_);
    spec_ = std::make_shared<const JobSpec>(std::move(spec));
  }

  std::shared_ptr<const JobSpec> spec() const {
    std::lock_guard lock(mu_);
    return spec_;
  }

  void deliver(Envelope env) override {
    const auto s = spec();
    if (!s) throw Error(ErrorCode::kRouting, "job has no rank map yet");
    if (env.dst >= s->world_size) {
      throw Error(ErrorCode::kRouting, "destination rank " + std::to_string(env.dst) +
                                           " outside a world of " +
                                           std::to_string(s->world_size));
    }
    const WorkerId target = s->rank_map.worker_of(env.dst);
    if (target == worker_.id_) {
      mailbox(env.dst).enqueue(std::move(env));
      return;
    }
    const auto body = encode_user_message(UserMessage{id_, env});
    if (s->routing == RoutingMode::kMasterRelay) {
      worker_.send_to_master(FrameKind::kUserMsg, body);
      return;
    }
    auto conn = worker_.resolve_endpoint(*this, env.dst);
    try {
      conn->send(FrameKind::kUserMsg, body);
    } catch (const Error& e) {
      throw Error(ErrorCode::kTransportFailure,
                  "peer connection to worker " + std::to_string(target) + " failed: " + e.what());
    }
  }

  ContextId allocate_contexts(std::uint32_t count) override {
    return worker_.allocate_contexts(count);
  }

  std::uint32_t world_size() const override {
    const auto s = spec();
    return s ? s->world_size : 0;
  }

  const FrameCounters& counters() const override { return worker_.counters_; }

  Mailbox& mailbox(WorldRank rank) {
    std::lock_guard lock(mu_);
    auto& slot = mailboxes_[rank];
    if (!slot) {
      slot = std::make_unique<Mailbox>(rank, &worker_.callbacks_);
      if (abort_reason_) slot->abort(ErrorCode::kReceiveAborted, *abort_reason_);
    }
    return *slot;
  }

  void abort(const std::string& reason) {
    std::vector<Mailbox*> boxes;
    {
      std::lock_guard lock(mu_);
      if (abort_reason_) return;
      abort_reason_ = reason;
      for (auto& [r, mb] : mailboxes_) boxes.push_back(mb.get());
    }
    for (auto* mb : boxes) mb->abort(ErrorCode::kReceiveAborted, reason);
  }

  void add_thread(std::thread t) {
    std::lock_guard lock(mu_);
    threads_.push_back(std::move(t));
  }

  void join() {
    std::vector<std::thread> ts;
    {
      std::lock_guard lock(mu_);
      ts.swap(threads_);
    }
    for (auto& t : ts) {
      if (!t.joinable()) continue;
      if (t.get_id() == std::this_thread::get_id()) {
        t.detach();
      } else {
        t.join();
      }
    }
  }

 private:
  Worker& worker_;
  const JobId id_;
  mutable std::mutex mu_;
  std::shared_ptr<const JobSpec> spec_;
  std::map<WorldRank, std::unique_ptr<Mailbox>> mailboxes_;
  std::optional<std::string> abort_reason_;
  std::vector<std::thread> threads_;
};

Worker::Worker(const FunctionRegistry& registry, WorkerOptions options)
    : registry_(registry),
      options_(std::move(options)),
      listener_(options_.listen),
      callbacks_(options_.callback_threads) {}

Worker::~Worker() {
  if (master_) {
    stop();
    wait();
  } else {
    listener_.close();
  }
}

void Worker::start() {
  log::set_role("worker");
  auto conn = std::make_shared<Connection>(connect_to(options_.master), "master", &counters_);
  conn->send_now(FrameKind::kHello, encode_hello(Hello{0, listener_.address()}));
  auto reply = conn->read_one();
  if (!reply || reply->kind != FrameKind::kHello) {
    throw Error(ErrorCode::kProtocol, "master did not answer HELLO");
  }
  id_ = decode_hello(reply->body).worker;
  if (id_ == 0) throw Error(ErrorCode::kProtocol, "master assigned worker id 0");
  log::info("event=worker-registered worker={} listen={}", id_, listener_.address().to_string());

  master_ = conn;
  acceptor_ = std::thread([this] { accept_loop(); });
  master_->start([this](Frame f) { on_master_frame(std::move(f)); },
                 [this](const std::optional<Error>& err) { on_master_close(err); });
}

int Worker::wait() {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return stopping_; });
    if (cleaned_) return exit_code_;
    cleaned_ = true;
  }
  std::vector<std::shared_ptr<Job>> jobs;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, j] : jobs_) jobs.push_back(j);
    for (auto& j : retired_) jobs.push_back(j);
    jobs_.clear();
    retired_.clear();
  }
  for (auto& j : jobs) j->abort("worker shutting down");
  fail_pending(Error(ErrorCode::kTransportFailure, "worker shutting down"));

  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  if (master_) master_->close();

  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, c] : endpoints_) conns.push_back(c);
    for (auto& c : inbound_) conns.push_back(c);
  }
  for (auto& c : conns) c->close();
  for (auto& j : jobs) j->join();
  callbacks_.drain();
  log::info("event=worker-exit code={}", exit_code_);
  return exit_code_;
}

void Worker::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
}

std::size_t Worker::cached_endpoints() const {
  std::lock_guard lock(mu_);
  return endpoints_.size();
}

void Worker::send_to_master(FrameKind kind, const Bytes& body) {
  try {
    master_->send(kind, body);
  } catch (const Error& e) {
    throw Error(ErrorCode::kTransportFailure, std::string("master unreachable: ") + e.what());
  }
}

void Worker::fail_pending(const Error& err) {
  std::map<WorldRank, std::promise<RankMapEntry>> addrs;
  std::map<std::uint64_t, std::promise<CtxAllocReply>> ctxs;
  {
    std::lock_guard lock(mu_);
    pending_failure_ = err;
    addrs.swap(addr_waiters_);
    ctxs.swap(ctx_waiters_);
  }
  for (auto& [r, p] : addrs) p.set_exception(std::make_exception_ptr(err));
  for (auto& [r, p] : ctxs) p.set_exception(std::make_exception_ptr(err));
}

void Worker::on_master_frame(Frame frame) {
  log::set_role("worker");
  switch (frame.kind) {
    case FrameKind::kTaskAssign:
      handle_task(decode_job_spec(frame.body));
      return;
    case FrameKind::kUserMsg:
      route_inbound(decode_user_message(frame.body));
      return;
    case FrameKind::kAddrReply: {
      auto entry = decode_addr_reply(frame.body);
      std::lock_guard lock(mu_);
      auto it = addr_waiters_.find(entry.rank);
      if (it != addr_waiters_.end()) {
        it->second.set_value(std::move(entry));
        addr_waiters_.erase(it);
      }
      return;
    }
    case FrameKind::kCtxAllocReply: {
      auto reply = decode_ctx_reply(frame.body);
      std::lock_guard lock(mu_);
      auto it = ctx_waiters_.find(reply.request);
      if (it != ctx_waiters_.end()) {
        it->second.set_value(reply);
        ctx_waiters_.erase(it);
      }
      return;
    }
    case FrameKind::kJobDone:
      handle_job_done(decode_job_done(frame.body));
      return;
    case FrameKind::kShutdown:
      log::info("event=shutdown-received");
      stop();
      return;
    default:
      throw Error(ErrorCode::kProtocol,
                  "unexpected " + std::string(to_string(frame.kind)) + " frame from master");
  }
}

void Worker::on_master_close(const std::optional<Error>& err) {
  bool lost = false;
  {
    std::lock_guard lock(mu_);
    if (!stopping_) {
      stopping_ = true;
      exit_code_ = 1;
      lost = true;
    }
  }
  if (lost) {
    log::error("event=master-lost what=\"{}\"", err ? err->what() : "connection closed");
  }
  fail_pending(Error(ErrorCode::kTransportFailure, "master connection lost"));
  cv_.notify_all();
}

std::shared_ptr<Worker::Job> Worker::job_for(JobId id, bool create) {
  std::lock_guard lock(mu_);
  if (id <= last_finished_ || stopping_) return nullptr;
  auto it = jobs_.find(id);
  if (it != jobs_.end()) return it->second;
  if (!create) return nullptr;
  auto job = std::make_shared<Job>(*this, id);
  jobs_.emplace(id, job);
  return job;
}

void Worker::retire_jobs() {
  std::vector<std::shared_ptr<Job>> done;
  {
    std::lock_guard lock(mu_);
    done.swap(retired_);
  }
  for (auto& j : done) j->join();
}

void Worker::handle_task(JobSpec spec) {
  // The master only assigns a new job once every rank of the previous one
  // reported, so their threads are at most finishing up.
  retire_jobs();
  auto job = job_for(spec.job, true);
  if (!job) {
    log::warn("event=stale-task job={}", spec.job);
    return;
  }
  const auto ranks = spec.assigned;
  const auto world_size = spec.world_size;
  auto parameter = spec.parameter;
  const std::string function = spec.function;
  job->assign(std::move(spec));
  log::info("event=task-assign job={} function={} ranks={}", job->id(), function, ranks.size());

  const ParallelFunction* fn = nullptr;
  std::string missing;
  try {
    fn = &registry_.find(function);
  } catch (const Error& e) {
    missing = e.what();
  }

  for (auto rank : ranks) {
    if (!fn) {
      RankResult res{job->id(), rank, ResultStatus::kFailed, {}, ErrorCode::kRegistry, missing};
      send_to_master(FrameKind::kResult, encode_result(res));
      continue;
    }
    auto env = std::make_shared<ProcessEnv>();
    env->world_rank = rank;
    env->world_size = world_size;
    env->transport = job.get();
    env->mailbox = &job->mailbox(rank);
    env->parameter = parameter;
    job->add_thread(std::thread([this, fn, env, job] {
      log::set_role("worker");
      log::set_rank(env->world_rank);
      auto outcome = run_closure(*fn, env);
      RankResult res;
      res.job = job->id();
      res.rank = env->world_rank;
      if (outcome.value) {
        res.value = std::move(*outcome.value);
      } else {
        res.status = ResultStatus::kFailed;
        res.error = outcome.code;
        res.message = std::move(outcome.message);
      }
      try {
        send_to_master(FrameKind::kResult, encode_result(res));
      } catch (const Error& e) {
        log::error("event=result-lost what=\"{}\"", e.what());
      }
    }));
  }
}

void Worker::handle_job_done(JobId id) {
  std::vector<std::shared_ptr<Job>> finished;
  {
    std::lock_guard lock(mu_);
    last_finished_ = std::max(last_finished_, id);
    for (auto it = jobs_.begin(); it != jobs_.end();) {
      if (it->first <= last_finished_) {
        finished.push_back(it->second);
        retired_.push_back(it->second);
        it = jobs_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& j : finished) j->abort("job " + std::to_string(j->id()) + " is over");
  log::debug("event=job-done job={}", id);
}

void Worker::route_inbound(const UserMessage& msg) {
  auto job = job_for(msg.job, true);
  if (!job) {
    log::debug("event=stale-message job={} dst={}", msg.job, msg.envelope.dst);
    return;
  }
  if (const auto s = job->spec()) {
    if (msg.envelope.dst >= s->world_size || s->rank_map.worker_of(msg.envelope.dst) != id_) {
      log::warn("event=misrouted-message dst={}", msg.envelope.dst);
      return;
    }
  }
  job->mailbox(msg.envelope.dst).enqueue(msg.envelope);
}

std::shared_ptr<Connection> Worker::resolve_endpoint(const Job& job, WorldRank dst) {
  const auto s = job.spec();
  const WorkerId target = s->rank_map.worker_of(dst);

  std::promise<std::shared_ptr<Connection>> resolved;
  std::future<RankMapEntry> address;
  {
    std::unique_lock lock(mu_);
    if (auto it = endpoints_.find(target); it != endpoints_.end()) return it->second;
    if (auto it = resolving_.find(target); it != resolving_.end()) {
      auto pending = it->second;
      lock.unlock();
      return pending.get();
    }
    if (pending_failure_ && stopping_) throw *pending_failure_;
    resolving_.emplace(target, resolved.get_future().share());
    std::promise<RankMapEntry> p;
    address = p.get_future();
    addr_waiters_[dst] = std::move(p);
  }

  try {
    send_to_master(FrameKind::kAddrReq, encode_addr_request(dst));
    const auto entry = address.get();
    if (entry.worker == 0) {
      throw Error(ErrorCode::kRouting, "master has no address for rank " + std::to_string(dst));
    }
    auto conn = std::make_shared<Connection>(connect_to(entry.address),
                                             "peer-" + std::to_string(entry.worker), &counters_);
    conn->send_now(FrameKind::kHello, encode_hello(Hello{id_, listener_.address()}));
    conn->start(
        [](Frame f) {
          log::warn("event=unexpected-peer-frame kind={}", to_string(f.kind));
        },
        nullptr);
    {
      std::lock_guard lock(mu_);
      endpoints_.emplace(target, conn);
      resolving_.erase(target);
    }
    log::debug("event=endpoint-cached worker={} address={}", target, entry.address.to_string());
    resolved.set_value(conn);
    return conn;
  } catch (...) {
    {
      std::lock_guard lock(mu_);
      resolving_.erase(target);
      addr_waiters_.erase(dst);
    }
    resolved.set_exception(std::current_exception());
    throw;
  }
}

ContextId Worker::allocate_contexts(std::uint32_t count) {
  std::future<CtxAllocReply> reply;
  std::uint64_t request;
  {
    std::lock_guard lock(mu_);
    if (pending_failure_ && stopping_) throw *pending_failure_;
    request = next_request_++;
    std::promise<CtxAllocReply> p;
    reply = p.get_future();
    ctx_waiters_[request] = std::move(p);
  }
  send_to_master(FrameKind::kCtxAllocReq, encode_ctx_request(CtxAllocRequest{request, count}));
  const auto r = reply.get();
  if (r.count != count) {
    throw Error(ErrorCode::kProtocol, "master allocated " + std::to_string(r.count) +
                                          " context ids, asked for " + std::to_string(count));
  }
  return r.first;
}

void Worker::accept_loop() {
  log::set_role("worker");
  for (;;) {
    Socket sock;
    try {
      sock = listener_.accept();
    } catch (const Error& e) {
      log::error("event=accept-failed what=\"{}\"", e.what());
      return;
    }
    if (!sock.valid()) return;
    auto conn = std::make_shared<Connection>(std::move(sock), "inbound", &counters_);
    auto peer = std::make_shared<WorkerId>(0);
    {
      std::lock_guard lock(mu_);
      if (stopping_) return;
      inbound_.push_back(conn);
    }
    conn->start([this, peer](Frame f) { on_peer_frame(*peer, std::move(f)); },
                [peer](const std::optional<Error>& err) {
                  if (err) log::debug("event=peer-closed peer={} what=\"{}\"", *peer, err->what());
                });
  }
}

void Worker::on_peer_frame(WorkerId& peer, Frame frame) {
  log::set_role("worker");
  switch (frame.kind) {
    case FrameKind::kHello:
      peer = decode_hello(frame.body).worker;
      return;
    case FrameKind::kUserMsg:
      if (peer == 0) throw Error(ErrorCode::kProtocol, "USER_MSG before HELLO on peer link");
      route_inbound(decode_user_message(frame.body));
      return;
    default:
      throw Error(ErrorCode::kProtocol,
                  "unexpected " + std::string(to_string(frame.kind)) + " frame from peer");
  }
}

}  // namespace mpignite
