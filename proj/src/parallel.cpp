#include "jhsvd/parallel.hpp"

namespace jhsvd {

WorkerPool::WorkerPool(int workers) : workers_(workers < 1 ? 1 : workers) {
  if (workers_ == 1) return;
  threads_.reserve(static_cast<std::size_t>(workers_));
  for (int i = 0; i < workers_; ++i) threads_.emplace_back([this] { worker_loop(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    quit_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::drain() {
  for (;;) {
    std::int64_t i;
    const std::function<void(std::int64_t)>* fn;
    {
      std::lock_guard lock(mu_);
      if (next_ >= count_) return;
      i = next_++;
      fn = fn_;
    }
    std::exception_ptr err;
    try {
      (*fn)(i);
    } catch (...) {
      err = std::current_exception();
    }
    std::lock_guard lock(mu_);
    if (err && (error_task_ < 0 || i < error_task_)) {
      error_task_ = i;
      error_ = err;
    }
    if (++finished_ == count_) done_.notify_all();
  }
}

void WorkerPool::worker_loop() {
  std::uint64_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mu_);
      wake_.wait(lock, [&] { return quit_ || generation_ != seen; });
      if (quit_) return;
      seen = generation_;
    }
    drain();
  }
}

void WorkerPool::run(std::int64_t count, const std::function<void(std::int64_t)>& fn) {
  if (count <= 0) return;
  if (threads_.empty()) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  {
    std::lock_guard lock(mu_);
    fn_ = &fn;
    count_ = count;
    next_ = finished_ = 0;
    error_task_ = -1;
    error_ = nullptr;
    ++generation_;
  }
  wake_.notify_all();
  std::unique_lock lock(mu_);
  done_.wait(lock, [&] { return finished_ == count_; });
  fn_ = nullptr;
  if (error_) std::rethrow_exception(error_);
}

}  // namespace jhsvd
