#pragma once

#include <cstddef>
#include <functional>

namespace nptc {

/// Upper bound on worker threads used by parallel loops. Defaults to 1.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [begin, end) split into contiguous chunks across
/// the configured number of threads. Bodies must only write to per-index
/// outputs; results are therefore independent of the thread count.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body);

}  // namespace nptc
