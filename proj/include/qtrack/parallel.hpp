// Minimal fork-join pool. Work items are indexed; callers write results into
// index-addressed slots so output order never depends on scheduling.
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace qtrack {

class Executor {
 public:
  /// threads <= 1 runs everything on the calling thread.
  explicit Executor(unsigned threads = 0);
  ~Executor();

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  unsigned threads() const { return static_cast<unsigned>(workers_.size()) + 1; }
  bool parallel() const { return !workers_.empty(); }

  /// Runs body(i) for i in [0, n). Nested calls from inside a body run
  /// sequentially. The first exception thrown by any body is rethrown.
  void for_each(std::size_t n, const std::function<void(std::size_t)>& body);

  /// Worker count from QPSO_TRACK_THREADS (0 = sequential), else the hardware count.
  static unsigned threads_from_env();

 private:
  void worker_loop();
  void drain(const std::function<void(std::size_t)>& body, std::size_t count);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* body_ = nullptr;
  std::size_t count_ = 0;
  std::atomic<std::size_t> next_{0};
  std::size_t active_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  std::mutex error_mutex_;
};

}  // namespace qtrack
