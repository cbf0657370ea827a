#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace scott {

/// Cap the number of threads used by Eigen and OpenMP. Results are bit-stable
/// for a fixed thread count.
void set_num_threads(int n);
int num_threads();

/// Blocking FIFO with a fixed capacity. close() wakes all waiters; pop()
/// returns nullopt once the queue is closed and drained.
template <typename V>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  bool push(V v) {
    std::unique_lock lk(mu_);
    not_full_.wait(lk, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(v));
    not_empty_.notify_one();
    return true;
  }

  std::optional<V> pop() {
    std::unique_lock lk(mu_);
    not_empty_.wait(lk, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    V v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<V> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
};

/// Produces items 0, 1, 2, ... on a background thread, at most `depth` ahead
/// of the consumer. Items arrive in index order.
template <typename V>
class Prefetcher {
 public:
  Prefetcher(std::function<V(std::int64_t)> make, std::int64_t begin, std::int64_t end, std::size_t depth)
      : queue_(depth), worker_([this, make = std::move(make), begin, end] {
          for (std::int64_t i = begin; i < end; ++i)
            if (!queue_.push(make(i))) return;
          queue_.close();
        }) {}

  ~Prefetcher() {
    queue_.close();
    if (worker_.joinable()) worker_.join();
  }

  Prefetcher(const Prefetcher&) = delete;
  Prefetcher& operator=(const Prefetcher&) = delete;

  std::optional<V> next() { return queue_.pop(); }

 private:
  BoundedQueue<V> queue_;
  std::thread worker_;
};

/// Appends lines to a file from a background thread, preserving order.
class AsyncLineWriter {
 public:
  AsyncLineWriter(const std::string& path, bool append);
  ~AsyncLineWriter();
  AsyncLineWriter(const AsyncLineWriter&) = delete;
  AsyncLineWriter& operator=(const AsyncLineWriter&) = delete;

  void write(std::string line);
  /// Flush everything queued so far and stop the writer thread.
  void close();

 private:
  std::ofstream out_;
  BoundedQueue<std::string> queue_;
  std::thread worker_;
  bool closed_ = false;
};

}  // namespace scott
