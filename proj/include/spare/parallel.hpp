#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace spare {

// Index-ordered parallel map: results land at their input position, so
// stage outputs are deterministic regardless of scheduling.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, int threads, Fn fn)
    -> std::vector<decltype(fn(items.front()))> {
  using Out = decltype(fn(items.front()));
  std::vector<Out> results(items.size());
  if (items.empty()) return results;

  int workers = threads < 1 ? 1 : threads;
  if (static_cast<std::size_t>(workers) > items.size()) {
    workers = static_cast<int>(items.size());
  }
  if (workers == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) results[i] = fn(items[i]);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= items.size()) return;
        try {
          results[i] = fn(items[i]);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace spare
