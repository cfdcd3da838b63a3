#include "flowdepth/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace flowdepth {

int worker_count() {
  if (const char* env = std::getenv("DCPI_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_rows(int rows, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), rows);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long>(rows) * w / workers);
    const int end = static_cast<int>(static_cast<long>(rows) * (w + 1) / workers);
    pool.emplace_back([&, begin, end] {
      try {
        for (int r = begin; r < end; ++r) fn(r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace flowdepth
