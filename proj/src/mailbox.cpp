#include "mpignite/mailbox.hpp"

#include <algorithm>

#include "mpignite/log.hpp"

namespace mpignite {

CallbackExecutor::CallbackExecutor(std::size_t threads) {
  threads_.reserve(threads);
  for (std::size_t i = 0; i < std::max<std::size_t>(threads, 1); ++i) {
    threads_.emplace_back([this] { run(); });
  }
}

CallbackExecutor::~CallbackExecutor() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void CallbackExecutor::post(std::function<void()> fn) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(fn));
  }
  cv_.notify_one();
}

void CallbackExecutor::drain() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

void CallbackExecutor::run() {
  log::set_role("callbacks");
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) return;  // stopping and drained
    auto fn = std::move(queue_.front());
    queue_.pop_front();
    ++running_;
    lock.unlock();
    try {
      fn();
    } catch (const std::exception& e) {
      log::error("event=callback-failed what=\"{}\"", e.what());
    }
    lock.lock();
    --running_;
    if (queue_.empty() && running_ == 0) idle_cv_.notify_all();
  }
}

namespace detail {

struct TicketState {
  std::mutex mu;
  std::condition_variable cv;
  ReceiveTicket::State state = ReceiveTicket::State::kPending;
  Payload payload;
  std::optional<Error> error;
  std::vector<std::function<void()>> callbacks;
  CallbackExecutor* executor = nullptr;

  // Returns false if the ticket had already settled.
  bool settle(std::optional<Payload> value, std::optional<Error> failure) {
    std::vector<std::function<void()>> to_run;
    {
      std::lock_guard lock(mu);
      if (state != ReceiveTicket::State::kPending) return false;
      if (value) {
        payload = std::move(*value);
        state = ReceiveTicket::State::kCompleted;
      } else {
        error = std::move(failure);
        state = ReceiveTicket::State::kFailed;
      }
      to_run.swap(callbacks);
    }
    cv.notify_all();
    for (auto& fn : to_run) dispatch(std::move(fn));
    return true;
  }

  void dispatch(std::function<void()> fn) {
    if (executor) {
      executor->post(std::move(fn));
    } else {
      fn();
    }
  }
};

}  // namespace detail

ReceiveTicket::State ReceiveTicket::state() const {
  std::lock_guard lock(state_->mu);
  return state_->state;
}

Payload ReceiveTicket::await() const {
  std::unique_lock lock(state_->mu);
  state_->cv.wait(lock, [this] { return state_->state != State::kPending; });
  if (state_->state == State::kFailed) throw *state_->error;
  return state_->payload;
}

std::optional<Payload> ReceiveTicket::await_until(Clock::time_point deadline) const {
  std::unique_lock lock(state_->mu);
  if (!state_->cv.wait_until(lock, deadline,
                             [this] { return state_->state != State::kPending; })) {
    return std::nullopt;
  }
  if (state_->state == State::kFailed) throw *state_->error;
  return state_->payload;
}

void ReceiveTicket::on_complete(std::function<void(const ReceiveTicket&)> fn) const {
  auto task = [self = *this, fn = std::move(fn)] { fn(self); };
  {
    std::lock_guard lock(state_->mu);
    if (state_->state == State::kPending) {
      state_->callbacks.emplace_back(std::move(task));
      return;
    }
  }
  state_->dispatch(std::move(task));
}

std::size_t MatchKeyHash::operator()(const MatchKey& k) const noexcept {
  std::size_t h = std::hash<std::uint64_t>{}(k.context);
  h ^= std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(k.src) << 32) |
                                  static_cast<std::uint32_t>(k.tag)) +
       0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

Mailbox::Mailbox(WorldRank owner, CallbackExecutor* executor, std::size_t watermark)
    : owner_(owner), executor_(executor), watermark_(watermark) {}

void Mailbox::enqueue(Envelope env) {
  if (env.dst != owner_) {
    throw Error(ErrorCode::kRouting, "envelope for rank " + std::to_string(env.dst) +
                                         " enqueued at mailbox of rank " +
                                         std::to_string(owner_));
  }
  const MatchKey key{env.context, env.src, env.tag};
  std::shared_ptr<detail::TicketState> ticket;
  {
    std::lock_guard lock(mu_);
    if (abort_error_) return;
    ++enqueued_total_;
    auto it = pending_.find(key);
    if (it != pending_.end()) {
      ticket = std::move(it->second.front());
      it->second.pop_front();
      if (it->second.empty()) pending_.erase(it);
      --pending_count_;
    } else {
      buffered_[key].push_back(std::move(env.payload));
      ++buffered_count_;
      if (buffered_count_ > watermark_ && !above_watermark_) {
        above_watermark_ = true;
        log::warn("event=mailbox-watermark owner={} buffered={}", owner_, buffered_count_);
      } else if (buffered_count_ <= watermark_) {
        above_watermark_ = false;
      }
      return;
    }
  }
  ticket->settle(std::move(env.payload), std::nullopt);
}

ReceiveTicket Mailbox::receive_async(const MatchKey& key) {
  auto state = std::make_shared<detail::TicketState>();
  state->executor = executor_;
  std::optional<Payload> ready;
  std::optional<Error> failure;
  {
    std::lock_guard lock(mu_);
    if (abort_error_) {
      failure = abort_error_;
    } else if (auto it = buffered_.find(key); it != buffered_.end()) {
      ready = std::move(it->second.front());
      it->second.pop_front();
      if (it->second.empty()) buffered_.erase(it);
      --buffered_count_;
    } else {
      pending_[key].push_back(state);
      ++pending_count_;
    }
  }
  if (ready || failure) state->settle(std::move(ready), std::move(failure));
  return ReceiveTicket(std::move(state));
}

Payload Mailbox::receive(const MatchKey& key) {
  return receive_async(key).await();
}

std::optional<Payload> Mailbox::receive_until(const MatchKey& key,
                                              Clock::time_point deadline) {
  auto ticket = receive_async(key);
  if (auto p = ticket.await_until(deadline)) return p;
  if (withdraw(ticket.state_)) return std::nullopt;
  // Matched between the timeout and the withdrawal.
  return ticket.await();
}

bool Mailbox::withdraw(const std::shared_ptr<detail::TicketState>& ticket) {
  std::lock_guard lock(mu_);
  for (auto it = pending_.begin(); it != pending_.end(); ++it) {
    auto& q = it->second;
    auto pos = std::find(q.begin(), q.end(), ticket);
    if (pos != q.end()) {
      q.erase(pos);
      if (q.empty()) pending_.erase(it);
      --pending_count_;
      return true;
    }
  }
  return false;
}

void Mailbox::abort(ErrorCode code, const std::string& reason) {
  std::vector<std::shared_ptr<detail::TicketState>> waiting;
  Error err(code, reason);
  {
    std::lock_guard lock(mu_);
    if (abort_error_) return;
    abort_error_ = err;
    for (auto& [key, q] : pending_) {
      for (auto& t : q) waiting.push_back(std::move(t));
    }
    pending_.clear();
    pending_count_ = 0;
    buffered_.clear();
    buffered_count_ = 0;
  }
  for (auto& t : waiting) t->settle(std::nullopt, err);
}

bool Mailbox::aborted() const {
  std::lock_guard lock(mu_);
  return abort_error_.has_value();
}

std::size_t Mailbox::buffered_count() const {
  std::lock_guard lock(mu_);
  return buffered_count_;
}

std::size_t Mailbox::pending_count() const {
  std::lock_guard lock(mu_);
  return pending_count_;
}

std::uint64_t Mailbox::enqueued_total() const {
  std::lock_guard lock(mu_);
  return enqueued_total_;
}

}  // namespace mpignite
