#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace her2 {

/// Fixed-size worker pool. Tasks run FIFO.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t workers) {
    workers = std::max<std::size_t>(workers, 1);
    threads_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) {
      threads_.emplace_back([this](std::stop_token st) { run(st); });
    }
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    threads_.clear();
  }

  std::size_t size() const { return threads_.size(); }

  template <typename F>
  auto submit(F&& fn) -> std::future<std::invoke_result_t<F>> {
    using R = std::invoke_result_t<F>;
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(fn));
    auto fut = task->get_future();
    {
      std::lock_guard lock(mutex_);
      queue_.emplace_back([task] { (*task)(); });
    }
    cv_.notify_one();
    return fut;
  }

 private:
  void run(std::stop_token) {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      job();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::vector<std::jthread> threads_;
};

/// Runs fn(lo, hi) over chunks of [begin, end). The calling thread takes chunks
/// too, so nesting inside a pool task cannot deadlock.
template <typename F>
void parallel_for(ThreadPool* pool, int begin, int end, F&& fn, int min_chunk = 16) {
  const int n = end - begin;
  if (n <= 0) return;
  if (pool == nullptr || pool->size() <= 1 || n <= min_chunk) {
    fn(begin, end);
    return;
  }
  const int chunks = std::min<int>(static_cast<int>(pool->size()) * 4, (n + min_chunk - 1) / min_chunk);
  const int step = (n + chunks - 1) / chunks;

  struct State {
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::mutex m;
    std::condition_variable cv;
    std::exception_ptr error;
  };
  auto state = std::make_shared<State>();
  auto* body = &fn;

  auto worker = [state, body, begin, end, step, chunks] {
    for (;;) {
      const int c = state->next.fetch_add(1);
      if (c >= chunks) return;
      const int lo = begin + c * step;
      const int hi = std::min(end, lo + step);
      if (lo < hi) {
        try {
          (*body)(lo, hi);
        } catch (...) {
          std::lock_guard lock(state->m);
          if (!state->error) state->error = std::current_exception();
        }
      }
      if (state->done.fetch_add(1) + 1 == chunks) {
        std::lock_guard lock(state->m);
        state->cv.notify_all();
      }
    }
  };
  const std::size_t helpers = std::min<std::size_t>(pool->size(), static_cast<std::size_t>(chunks) - 1);
  for (std::size_t i = 0; i < helpers; ++i) pool->submit(worker);
  worker();
  std::unique_lock lock(state->m);
  state->cv.wait(lock, [&] { return state->done.load() == chunks; });
  if (state->error) std::rethrow_exception(state->error);
}

}  // namespace her2
