#include "tubelet/core/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace tubelet::core {

namespace {

thread_local bool tl_inside_pool = false;

class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(int64_t n, int64_t chunk, const std::function<void(int64_t, int64_t)>& body) {
    {
      std::lock_guard<std::mutex> lk(mu_);
      body_ = &body;
      total_ = n;
      chunk_ = chunk;
      next_.store(0, std::memory_order_relaxed);
      pending_ = (n + chunk - 1) / chunk;
      ++generation_;
    }
    cv_.notify_all();
    bool was_inside = tl_inside_pool;
    tl_inside_pool = true;
    drain();  // calling thread participates
    tl_inside_pool = was_inside;
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    body_ = nullptr;
  }

 private:
  void drain() {
    while (true) {
      int64_t b = next_.fetch_add(chunk_, std::memory_order_relaxed);
      if (b >= total_) break;
      int64_t e = std::min(b + chunk_, total_);
      (*body_)(b, e);
      std::lock_guard<std::mutex> lk(mu_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  void worker_loop() {
    tl_inside_pool = true;
    uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        if (body_ == nullptr) continue;
      }
      drain();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int64_t, int64_t)>* body_ = nullptr;
  int64_t total_ = 0;
  int64_t chunk_ = 1;
  std::atomic<int64_t> next_{0};
  int64_t pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p(max_threads() - 1);
  return p;
}

}  // namespace

int max_threads() {
  static int cached = [] {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("TUBELET_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) n = std::min(n, cap);
    }
    return std::min(n, 32);
  }();
  return cached;
}

void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& body) {
  if (n <= 0) return;
  if (grain < 1) grain = 1;
  const int threads = max_threads();
  if (threads == 1 || tl_inside_pool || n <= grain) {
    body(0, n);
    return;
  }
  // One chunk per thread unless grain forces fewer.
  int64_t chunk = (n + threads - 1) / threads;
  if (chunk < grain) chunk = grain;
  if (chunk >= n) {
    body(0, n);
    return;
  }
  pool().run(n, chunk, body);
}

}  // namespace tubelet::core
