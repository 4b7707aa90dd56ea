#pragma once

#include <cstddef>
#include <functional>

namespace wavestack {

/// Runs fn(i) for i in [0, count). Work is split over `threads` workers
/// (0 = hardware concurrency). Each index is processed exactly once, so
/// callers writing to slot i get results independent of the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = 0);

}  // namespace wavestack
