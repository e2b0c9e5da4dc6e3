#pragma once

// A fixed set of worker threads running fork-join batches of independent
// tasks.  Which thread runs which task is unspecified, so callers must only
// write task-private data; run() returns after every task has finished.

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace jhsvd {

class WorkerPool {
 public:
  /// workers <= 1 runs every batch on the calling thread.
  explicit WorkerPool(int workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  [[nodiscard]] int workers() const noexcept { return workers_; }

  /// Calls fn(i) for i in [0, count).  If tasks throw, the exception of the
  /// lowest-numbered failing task is rethrown.
  void run(std::int64_t count, const std::function<void(std::int64_t)>& fn);

 private:
  void worker_loop();
  void drain();

  int workers_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable wake_, done_;
  const std::function<void(std::int64_t)>* fn_ = nullptr;
  std::int64_t count_ = 0, next_ = 0, finished_ = 0;
  std::uint64_t generation_ = 0;
  bool quit_ = false;
  std::int64_t error_task_ = -1;
  std::exception_ptr error_;
};

}  // namespace jhsvd
