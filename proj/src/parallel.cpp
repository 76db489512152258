#include "geodesic_atlas/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "geodesic_atlas/errors.hpp"

namespace geodesic_atlas {

int thread_budget() {
  int requested = 0;
  if (const char* env = std::getenv("GEODESIC_ATLAS_THREADS"); env != nullptr && *env != '\0') {
    try {
      requested = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("GEODESIC_ATLAS_THREADS must be an integer, got '") + env + "'");
    }
    if (requested < 0) throw ConfigError("GEODESIC_ATLAS_THREADS must be >= 0");
  }
  if (requested == 0) requested = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return requested;
}

void parallel_for(int n, const std::function<void(int)>& fn, int threads) {
  threads = std::clamp(threads, 1, std::max(n, 1));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace geodesic_atlas
