#pragma once

#include <cstddef>
#include <functional>

namespace semilab {

/// Worker count for Monte Carlo loops. Initialized from SEMILAB_THREADS, else the hardware
/// concurrency. Results never depend on this value (see parallel_chunks).
int thread_count();
void set_thread_count(int threads);

/// Fixed work granularity. Chunk boundaries depend only on the problem size, so per-chunk partial
/// results reduced in chunk order are bit-identical for any thread count.
inline constexpr std::size_t kChunkSize = 2048;

inline std::size_t chunk_count(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

/// Calls body(chunk, begin, end) for every chunk of [0, n). Exceptions thrown by a body are
/// rethrown on the caller's thread (the one from the lowest-numbered failing chunk).
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace semilab
