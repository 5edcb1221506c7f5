#include "mpignite/runtime.hpp"

#include <thread>

#include "mpignite/log.hpp"

namespace mpignite {

void FunctionRegistry::add_body(std::string name, Body body) {
  if (name.empty()) throw Error(ErrorCode::kRegistry, "registered functions need a name");
  if (!body) throw Error(ErrorCode::kRegistry, "function '" + name + "' has no body");
  auto [it, inserted] = functions_.emplace(name, ParallelFunction{name, std::move(body)});
  if (!inserted) {
    throw Error(ErrorCode::kRegistry, "function '" + name + "' is already registered");
  }
}

const ParallelFunction& FunctionRegistry::find(std::string_view name) const {
  auto it = functions_.find(name);
  if (it == functions_.end()) {
    throw Error(ErrorCode::kRegistry, "no parallel function named '" + std::string(name) + "'");
  }
  return it->second;
}

bool FunctionRegistry::contains(std::string_view name) const {
  return functions_.find(name) != functions_.end();
}

std::vector<std::string> FunctionRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : functions_) out.push_back(name);
  return out;
}

namespace {

bool is_abort_code(ErrorCode c) {
  return c == ErrorCode::kReceiveAborted || c == ErrorCode::kCollectiveAborted;
}

std::string describe_failure(JobId job, WorldRank origin, const std::vector<RankFailure>& fs) {
  for (const auto& f : fs) {
    if (f.rank == origin) {
      return "job " + std::to_string(job) + " failed at rank " + std::to_string(origin) + ": " +
             std::string(to_string(f.code)) + ": " + f.message;
    }
  }
  return "job " + std::to_string(job) + " failed";
}

WorldRank pick_origin(const std::vector<RankFailure>& fs) {
  for (const auto& f : fs) {
    if (!is_abort_code(f.code)) return f.rank;
  }
  return fs.empty() ? 0 : fs.front().rank;
}

}  // namespace

JobFailure::JobFailure(JobId job, WorldRank origin, std::vector<RankFailure> failures)
    : Error(ErrorCode::kJobFailure, describe_failure(job, origin, failures)),
      job_(job),
      origin_(origin),
      failures_(std::move(failures)) {}

JobState::JobState(JobId id, std::uint32_t world_size)
    : id_(id),
      world_size_(world_size),
      results_(world_size),
      reported_(world_size, false),
      outstanding_(world_size) {}

bool JobState::record(WorldRank rank, std::optional<Payload> value,
                      std::optional<RankFailure> failure) {
  bool first_failure = false;
  {
    std::lock_guard lock(mu_);
    if (rank >= world_size_ || reported_[rank]) {
      log::warn("event=duplicate-result job={} rank={}", id_, rank);
      return false;
    }
    reported_[rank] = true;
    --outstanding_;
    if (value) {
      results_[rank] = std::move(value);
    } else {
      first_failure = failures_.empty();
      failures_.push_back(std::move(*failure));
    }
  }
  cv_.notify_all();
  return first_failure;
}

bool JobState::record_result(WorldRank rank, Payload value) {
  return record(rank, std::move(value), std::nullopt);
}

bool JobState::record_failure(WorldRank rank, ErrorCode code, std::string message) {
  return record(rank, std::nullopt, RankFailure{rank, code, std::move(message)});
}

bool JobState::complete() const {
  std::lock_guard lock(mu_);
  return outstanding_ == 0;
}

bool JobState::failed() const {
  std::lock_guard lock(mu_);
  return !failures_.empty();
}

std::vector<WorldRank> JobState::outstanding() const {
  std::lock_guard lock(mu_);
  std::vector<WorldRank> out;
  for (WorldRank r = 0; r < world_size_; ++r) {
    if (!reported_[r]) out.push_back(r);
  }
  return out;
}

void JobState::wait() const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return outstanding_ == 0; });
}

void JobState::set_finalizer(std::function<void()> fn) {
  std::lock_guard lock(mu_);
  finalizer_ = std::move(fn);
}

std::vector<Payload> JobState::collect_payloads() {
  wait();
  std::function<void()> fin;
  {
    std::lock_guard lock(mu_);
    fin = std::exchange(finalizer_, nullptr);
  }
  if (fin) fin();
  std::lock_guard lock(mu_);
  if (!failures_.empty()) {
    throw JobFailure(id_, pick_origin(failures_), failures_);
  }
  std::vector<Payload> out;
  out.reserve(world_size_);
  for (auto& r : results_) out.push_back(*r);
  return out;
}

std::vector<Value> collect_results(const JobHandle& handle) {
  auto payloads = handle.state()->collect_payloads();
  std::vector<Value> out;
  out.reserve(payloads.size());
  for (const auto& p : payloads) out.push_back(decode(p, p.kind()));
  return out;
}

LocalBackend::LocalBackend(std::size_t callback_threads)
    : callbacks_(std::make_unique<CallbackExecutor>(callback_threads)) {}

LocalBackend::~LocalBackend() = default;

const FrameCounters& LocalBackend::last_counters() const {
  return last_transport_ ? last_transport_->counters() : empty_;
}

namespace {

// Returns true when this rank delivered the job's first failure.
bool run_rank(const ParallelFunction& fn, std::shared_ptr<const ProcessEnv> env,
              JobState& state) {
  const auto rank = env->world_rank;
  auto outcome = run_closure(fn, std::move(env));
  if (outcome.value) {
    state.record_result(rank, std::move(*outcome.value));
    return false;
  }
  return state.record_failure(rank, outcome.code, std::move(outcome.message));
}

}  // namespace

RankOutcome run_closure(const ParallelFunction& fn, std::shared_ptr<const ProcessEnv> env) {
  RankOutcome out;
  try {
    auto comm = Communicator::world(std::move(env));
    out.value = encode(fn.body(comm));
  } catch (const Error& e) {
    out.code = e.code();
    out.message = e.what();
  } catch (const std::exception& e) {
    out.code = ErrorCode::kUserError;
    out.message = e.what();
  } catch (...) {
    out.code = ErrorCode::kUserError;
    out.message = "unknown exception";
  }
  if (!out.value) {
    log::info("event=rank-failed code={} what=\"{}\"", to_string(out.code), out.message);
  }
  return out;
}

JobHandle LocalBackend::submit(const ParallelFunction& fn, std::uint32_t n,
                               const JobOptions& options) {
  if (n == 0) throw Error(ErrorCode::kUsage, "execute needs at least one process");
  if (!fn.body) throw Error(ErrorCode::kRegistry, "parallel function has no body");
  const JobId id = next_job_++;
  auto state = std::make_shared<JobState>(id, n);
  auto transport = std::make_shared<LocalTransport>(n, callbacks_.get());
  last_transport_ = transport;
  auto threads = std::make_shared<std::vector<std::thread>>();
  threads->reserve(n);

  CallbackExecutor* callbacks = callbacks_.get();
  state->set_finalizer([threads, callbacks] {
    for (auto& t : *threads) t.join();
    callbacks->drain();
  });

  log::debug("event=job-submit job={} function={} n={}", id, fn.name.empty() ? "<closure>" : fn.name, n);
  for (WorldRank r = 0; r < n; ++r) {
    auto env = std::make_shared<ProcessEnv>();
    env->world_rank = r;
    env->world_size = n;
    env->transport = transport.get();
    env->mailbox = &transport->mailbox(r);
    env->parameter = options.parameter;
    env->split_timeout = options.split_timeout;
    threads->emplace_back([fn, env, state, transport, id] {
      log::set_role("local");
      log::set_rank(env->world_rank);
      if (run_rank(fn, env, *state)) {
        transport->abort(ErrorCode::kReceiveAborted,
                         "job " + std::to_string(id) + " aborted after rank " +
                             std::to_string(env->world_rank) + " failed");
      }
    });
  }
  return JobHandle(std::move(state));
}

ParallelJob<Value> Context::parallelize_func(std::string_view name) const {
  if (!registry_) {
    throw Error(ErrorCode::kRegistry, "context has no function registry");
  }
  return ParallelJob<Value>(*backend_, registry_->find(name));
}

}  // namespace mpignite
