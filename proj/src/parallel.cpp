#include "qtrack/parallel.hpp"

#include <cstdlib>
#include <string>

namespace qtrack {

namespace {
thread_local bool inside_pool_task = false;
}

Executor::Executor(unsigned threads) {
  for (unsigned i = 1; i < threads; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Executor::~Executor() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : workers_) t.join();
}

unsigned Executor::threads_from_env() {
  if (const char* env = std::getenv("QPSO_TRACK_THREADS")) {
    try {
      const long v = std::stol(env);
      return v <= 0 ? 0u : static_cast<unsigned>(v);
    } catch (const std::exception&) {
      return 0;
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void Executor::drain(const std::function<void(std::size_t)>& body, std::size_t count) {
  const bool was_inside = inside_pool_task;
  inside_pool_task = true;
  for (std::size_t i = next_.fetch_add(1); i < count; i = next_.fetch_add(1)) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(error_mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }
  inside_pool_task = was_inside;
}

void Executor::worker_loop() {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t)>* body = nullptr;
    std::size_t count = 0;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      if (body_ == nullptr) continue;  // job already finished
      body = body_;
      count = count_;
      ++active_;
    }
    drain(*body, count);
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    done_.notify_all();
  }
}

void Executor::for_each(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  if (workers_.empty() || inside_pool_task || n == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    body_ = &body;
    count_ = n;
    next_ = 0;
    error_ = nullptr;
    ++generation_;
  }
  wake_.notify_all();
  drain(body, n);
  {
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return active_ == 0 && next_.load() >= count_; });
    body_ = nullptr;
  }
  if (error_) std::rethrow_exception(error_);
}

}  // namespace qtrack
