#include "grnn/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace grnn {

namespace {

std::atomic<int> g_cap{-1};  // -1: unresolved, 0: auto, >0: explicit cap

int resolve_threads() {
  int cap = g_cap.load(std::memory_order_relaxed);
  if (cap < 0) {
    cap = 0;
    if (const char* env = std::getenv("GRNN_THREADS")) {
      cap = std::max(0, std::atoi(env));
    }
    g_cap.store(cap, std::memory_order_relaxed);
  }
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  return cap == 0 ? hw : std::min(cap, hw);
}

// Persistent pool; workers pick chunk indices from a shared counter.
// Chunking is a pure function of (n, nthreads), so outputs do not depend
// on which worker runs which chunk.
class Pool {
 public:
  static Pool& instance() {
    static Pool p;
    return p;
  }

  void run(int64_t n, int nthreads,
           const std::function<void(int64_t, int64_t)>& fn) {
    std::unique_lock<std::mutex> guard(run_mutex_);
    ensure_workers(nthreads - 1);

    const int64_t chunks = nthreads;
    chunk_size_ = (n + chunks - 1) / chunks;
    total_ = n;
    next_chunk_.store(0, std::memory_order_relaxed);
    fn_ = &fn;
    pending_ = static_cast<int>(workers_.size());
    {
      std::lock_guard<std::mutex> lk(m_);
      ++generation_;
    }
    cv_.notify_all();

    work();  // main thread participates

    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  Pool() = default;

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  void ensure_workers(int count) {
    while (static_cast<int>(workers_.size()) < count) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      work();
      std::unique_lock<std::mutex> lk(m_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  void work() {
    const auto* fn = fn_;
    if (!fn) return;
    for (;;) {
      int64_t chunk = next_chunk_.fetch_add(1, std::memory_order_relaxed);
      int64_t begin = chunk * chunk_size_;
      if (begin >= total_) break;
      int64_t end = std::min(begin + chunk_size_, total_);
      (*fn)(begin, end);
    }
  }

  std::mutex run_mutex_;
  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  uint64_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;

  const std::function<void(int64_t, int64_t)>* fn_ = nullptr;
  std::atomic<int64_t> next_chunk_{0};
  int64_t chunk_size_ = 0;
  int64_t total_ = 0;
};

}  // namespace

int max_threads() { return resolve_threads(); }

void set_max_threads(int n) { g_cap.store(n, std::memory_order_relaxed); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int nthreads = resolve_threads();
  if (nthreads <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  nthreads = static_cast<int>(std::min<int64_t>(nthreads, n));
  Pool::instance().run(n, nthreads, fn);
}

}  // namespace grnn
