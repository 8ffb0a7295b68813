#include "dlvmc/threads.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace dlvmc {

namespace {

int g_threads = 0;  // 0 = auto

// Minimal persistent pool: workers pull block indices from a shared counter.
class Pool {
 public:
  static Pool& instance() {
    static Pool* pool = new Pool();  // leaked: workers may outlive static dtors
    return *pool;
  }

  void run(int n_blocks, const std::function<void(int)>& task) {
    const int workers = std::min(effective_threads(), n_blocks);
    if (workers <= 1 || n_blocks <= 1) {
      for (int b = 0; b < n_blocks; ++b) task(b);
      return;
    }
    ensure_workers(workers - 1);
    {
      std::lock_guard<std::mutex> lock(m_);
      task_ = &task;
      next_ = 0;
      limit_ = n_blocks;
      pending_ = static_cast<int>(threads_.size());  // every pooled worker wakes
      ++epoch_;
    }
    cv_.notify_all();
    drain(task);
    std::unique_lock<std::mutex> lock(m_);
    done_cv_.wait(lock, [&] { return pending_ == 0; });
    task_ = nullptr;
  }

  static int effective_threads() {
    if (g_threads > 0) return g_threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }

 private:
  void drain(const std::function<void(int)>& task) {
    while (true) {
      const int b = next_.fetch_add(1);
      if (b >= limit_) break;
      task(b);
    }
  }

  void ensure_workers(int n) {
    while (static_cast<int>(threads_.size()) < n) {
      threads_.emplace_back([this] { worker(); });
    }
  }

  void worker() {
    std::uint64_t seen = 0;
    while (true) {
      const std::function<void(int)>* task = nullptr;
      {
        std::unique_lock<std::mutex> lock(m_);
        cv_.wait(lock, [&] { return epoch_ != seen && task_ != nullptr; });
        seen = epoch_;
        task = task_;
      }
      drain(*task);
      {
        std::lock_guard<std::mutex> lock(m_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  std::atomic<int> next_{0};
  int limit_ = 0;
  int pending_ = 0;
  std::uint64_t epoch_ = 0;
  std::vector<std::thread> threads_;
};

}  // namespace

void set_thread_count(int n) { g_threads = n; }
int thread_count() { return Pool::effective_threads(); }

void parallel_blocks(int n, const std::function<void(int, int)>& fn) {
  if (n <= 0) return;
  const int n_blocks = (n + kWalkerBlock - 1) / kWalkerBlock;
  Pool::instance().run(n_blocks, [&](int b) {
    const int begin = b * kWalkerBlock;
    const int end = std::min(n, begin + kWalkerBlock);
    fn(begin, end);
  });
}

}  // namespace dlvmc
