#include "semilab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace semilab {

namespace {

int initial_thread_count() {
  if (const char* env = std::getenv("SEMILAB_THREADS")) {
    try {
      const int value = std::stoi(env);
      if (value >= 1) return value;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<int>& threads_setting() {
  static std::atomic<int> threads{initial_thread_count()};
  return threads;
}

}  // namespace

int thread_count() { return threads_setting().load(); }

void set_thread_count(int threads) { threads_setting().store(std::max(1, threads)); }

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t chunks = chunk_count(n);
  const std::size_t workers = std::min<std::size_t>(chunks, static_cast<std::size_t>(thread_count()));
  auto run_chunk = [&](std::size_t c) { body(c, c * kChunkSize, std::min(n, (c + 1) * kChunkSize)); };

  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) {
        try {
          run_chunk(c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  for (auto& error : errors)
    if (error) std::rethrow_exception(error);
}

}  // namespace semilab
