#pragma once

#include <cstddef>
#include <functional>

namespace atlasfuse {

/// Worker count: ATLASFUSE_THREADS if set and > 0, otherwise hardware concurrency.
unsigned thread_count();

/// Splits [0, n) into fixed chunks of `chunk` items and runs fn(begin, end) on each.
/// Chunk boundaries depend only on n and chunk, never on the worker count, so
/// callers that reduce per chunk and combine in chunk order get schedule-independent
/// results.
void parallel_chunks(std::size_t n, std::size_t chunk, const std::function<void(std::size_t, std::size_t)>& fn);

inline constexpr std::size_t kDefaultChunk = 8192;

}  // namespace atlasfuse
