#pragma once

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mpignite/comm.hpp"

namespace mpignite {

using Body = std::function<Value(Communicator&)>;

/// A closure over one world communicator, the unit of parallel execution.
struct ParallelFunction {
  std::string name;  // empty for anonymous local closures
  Body body;
};

// Adapts `R f(Communicator&)` to a Body. R must be Encodable, Value, or void
// (reported as Unit).
template <class F>
Body make_body(F f) {
  using R = std::invoke_result_t<F&, Communicator&>;
  if constexpr (std::is_void_v<R>) {
    return [f = std::move(f)](Communicator& c) mutable -> Value {
      f(c);
      return Unit{};
    };
  } else if constexpr (std::is_same_v<R, Value>) {
    return Body(std::move(f));
  } else {
    static_assert(Encodable<R>, "parallel functions must return an encodable kind");
    return [f = std::move(f)](Communicator& c) mutable -> Value {
      return Value{std::in_place_type<R>, f(c)};
    };
  }
}

/// Name-keyed parallel functions. Cluster mode ships function names, so the
/// driver and every worker must register the same set.
class FunctionRegistry {
 public:
  template <class F>
  void add(std::string name, F f) {
    add_body(std::move(name), make_body(std::move(f)));
  }
  void add_body(std::string name, Body body);

  // Throws kRegistry for unknown names.
  const ParallelFunction& find(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, ParallelFunction, std::less<>> functions_;
};

struct JobOptions {
  RoutingMode routing = RoutingMode::kP2P;
  std::optional<Payload> parameter;
  std::chrono::milliseconds split_timeout{30000};
};

struct RankFailure {
  WorldRank rank = 0;
  ErrorCode code{};
  std::string message;
};

/// Raised by collect when any rank failed. `origin` is the first rank whose
/// failure was not a consequence of the job being aborted.
class JobFailure : public Error {
 public:
  JobFailure(JobId job, WorldRank origin, std::vector<RankFailure> failures);

  JobId job() const { return job_; }
  WorldRank origin() const { return origin_; }
  const std::vector<RankFailure>& failures() const { return failures_; }

 private:
  JobId job_;
  WorldRank origin_;
  std::vector<RankFailure> failures_;
};

/// Completion state of one submitted job, shared between the backend that
/// fills it and the driver that collects it.
class JobState {
 public:
  JobState(JobId id, std::uint32_t world_size);

  JobId id() const { return id_; }
  std::uint32_t world_size() const { return world_size_; }

  // Each returns true when it delivered the job's first failure.
  bool record_result(WorldRank rank, Payload value);
  bool record_failure(WorldRank rank, ErrorCode code, std::string message);

  bool complete() const;
  bool failed() const;
  // Ranks with no outcome yet.
  std::vector<WorldRank> outstanding() const;

  void wait() const;
  // Hook run once by collect after the barrier, before results are returned.
  void set_finalizer(std::function<void()> fn);
  std::vector<Payload> collect_payloads();

 private:
  bool record(WorldRank rank, std::optional<Payload> value, std::optional<RankFailure> failure);

  const JobId id_;
  const std::uint32_t world_size_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<std::optional<Payload>> results_;
  std::vector<bool> reported_;
  std::vector<RankFailure> failures_;
  std::uint32_t outstanding_;
  std::function<void()> finalizer_;
};

class JobHandle {
 public:
  explicit JobHandle(std::shared_ptr<JobState> state) : state_(std::move(state)) {}

  JobId id() const { return state_->id(); }
  std::uint32_t world_size() const { return state_->world_size(); }
  bool done() const { return state_->complete(); }
  std::shared_ptr<JobState> state() const { return state_; }

 private:
  std::shared_ptr<JobState> state_;
};

// Outcome of running one rank's closure to completion.
struct RankOutcome {
  std::optional<Payload> value;
  ErrorCode code{};
  std::string message;
};

// Runs `fn` over the world communicator of `env`, catching every failure.
RankOutcome run_closure(const ParallelFunction& fn, std::shared_ptr<const ProcessEnv> env);

// Blocks until every rank has finished (the implicit barrier), then returns
// results indexed by world rank or throws JobFailure.
std::vector<Value> collect_results(const JobHandle& handle);

/// Where jobs run: local threads or a cluster of workers.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual JobHandle submit(const ParallelFunction& fn, std::uint32_t n,
                           const JobOptions& options) = 0;
};

/// Local mode: every rank is a thread of this process over a LocalTransport.
class LocalBackend final : public Backend {
 public:
  explicit LocalBackend(std::size_t callback_threads = 2);
  ~LocalBackend() override;

  JobHandle submit(const ParallelFunction& fn, std::uint32_t n,
                   const JobOptions& options) override;

  // Frame counters of the most recent job's transport (always zero).
  const FrameCounters& last_counters() const;

 private:
  std::unique_ptr<CallbackExecutor> callbacks_;
  std::shared_ptr<LocalTransport> last_transport_;
  FrameCounters empty_;
  JobId next_job_ = 1;
};

/// Deferred parallel execution of one function; nothing runs until execute
/// or submit is called.
template <class R = Value>
class ParallelJob {
 public:
  ParallelJob(Backend& backend, ParallelFunction fn) : backend_(&backend), fn_(std::move(fn)) {}

  ParallelJob& routing(RoutingMode mode) {
    options_.routing = mode;
    return *this;
  }
  ParallelJob& parameter(Payload p) {
    options_.parameter = std::move(p);
    return *this;
  }
  ParallelJob& split_timeout(std::chrono::milliseconds t) {
    options_.split_timeout = t;
    return *this;
  }

  JobHandle submit(std::uint32_t n) const {
    if (n == 0) throw Error(ErrorCode::kUsage, "execute needs at least one process");
    return backend_->submit(fn_, n, options_);
  }

  std::vector<R> execute(std::uint32_t n) const {
    auto values = collect_results(submit(n));
    if constexpr (std::is_same_v<R, Value>) {
      return values;
    } else {
      std::vector<R> out;
      out.reserve(values.size());
      for (auto& v : values) {
        if (!std::holds_alternative<R>(v)) {
          throw Error(ErrorCode::kTypeMismatch,
                      "rank returned " + std::string(to_string(kind_of(v))) + ", expected " +
                          std::string(to_string(KindOf<R>::value)));
        }
        out.push_back(std::get<R>(std::move(v)));
      }
      return out;
    }
  }

  const ParallelFunction& function() const { return fn_; }
  const JobOptions& options() const { return options_; }

 private:
  Backend* backend_;
  ParallelFunction fn_;
  JobOptions options_;
};

/// Driver-side entry point, the analogue of a SparkContext.
class Context {
 public:
  explicit Context(Backend& backend, const FunctionRegistry* registry = nullptr)
      : backend_(&backend), registry_(registry) {}

  // Anonymous closure; local mode only.
  template <class F>
    requires std::is_invocable_v<F&, Communicator&>
  auto parallelize_func(F f) const {
    using Raw = std::invoke_result_t<F&, Communicator&>;
    using R = std::conditional_t<std::is_void_v<Raw>, Unit, Raw>;
    return ParallelJob<R>(*backend_, ParallelFunction{"", make_body(std::move(f))});
  }

  // Registered function, usable in both modes.
  ParallelJob<Value> parallelize_func(std::string_view name) const;

 private:
  Backend* backend_;
  const FunctionRegistry* registry_;
};

}  // namespace mpignite
