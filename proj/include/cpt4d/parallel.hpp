// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cpt4d {

// Persistent worker pool. Work is handed out as contiguous index ranges so
// that every output element is produced by exactly one task with a fixed
// internal order; results are therefore bit-identical for any worker count.
class ThreadPool {
 public:
  explicit ThreadPool(int workers) {
    workers = workers < 1 ? 1 : workers;
    for (int i = 0; i + 1 < workers; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int width() const { return static_cast<int>(threads_.size()) + 1; }

  // Runs fn(task_index) for task_index in [0, n); the calling thread
  // participates. Blocks until all tasks finish.
  void run(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (threads_.empty() || n == 1) {
      for (int i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::unique_lock<std::mutex> lk(mu_);
      fn_ = &fn;
      total_ = n;
      next_.store(0, std::memory_order_relaxed);
      pending_ = n;
      generation_++;
    }
    cv_.notify_all();
    drain(fn);
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  void drain(const std::function<void(int)>& fn) {
    for (;;) {
      int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= total_) break;
      fn(i);
      finish_one();
    }
  }

  void finish_one() {
    std::unique_lock<std::mutex> lk(mu_);
    if (--pending_ == 0) done_cv_.notify_all();
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* fn = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [this, seen] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        fn = fn_;
      }
      if (fn) {
        for (;;) {
          int i = next_.fetch_add(1, std::memory_order_relaxed);
          if (i >= total_) break;
          (*fn)(i);
          finish_one();
        }
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  std::atomic<int> next_{0};
  int total_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

inline int default_thread_count() {
  if (const char* env = std::getenv("CPT4D_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline ThreadPool& global_pool() {
  static ThreadPool pool(default_thread_count());
  return pool;
}

// Splits [0, n) into contiguous ranges and runs them on the pool.
template <class Fn>
void parallel_ranges(int n, int grain, Fn&& fn) {
  if (n <= 0) return;
  ThreadPool& pool = global_pool();
  int pieces = pool.width() * 4;
  int chunk = (n + pieces - 1) / pieces;
  if (chunk < grain) chunk = grain;
  int tasks = (n + chunk - 1) / chunk;
  std::function<void(int)> task = [&](int t) {
    int lo = t * chunk;
    int hi = lo + chunk < n ? lo + chunk : n;
    fn(lo, hi);
  };
  pool.run(tasks, task);
}

}  // namespace cpt4d
