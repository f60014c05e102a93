#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace graspalign::detail {

// Runs fn(begin, end, chunk_index) over contiguous index chunks. Callers
// accumulate into per-chunk slots and reduce in chunk order afterwards, so
// results do not depend on scheduling.
template <typename Fn>
void parallel_chunks(std::size_t count, int threads, Fn&& fn) {
  const int workers =
      threads <= 1 ? 1
                   : static_cast<int>(std::min<std::size_t>(
                         static_cast<std::size_t>(threads), count ? count : 1));
  if (workers <= 1) {
    fn(std::size_t{0}, count, std::size_t{0});
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::size_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) {
      break;
    }
    pool.emplace_back([=, &fn] { fn(begin, end, static_cast<std::size_t>(w)); });
  }
  for (auto& t : pool) {
    t.join();
  }
}

}  // namespace graspalign::detail
