#pragma once

#include <cstddef>
#include <functional>

namespace tubeness {

// Global worker count. 0 means "use hardware concurrency". The CLI sets this
// from --threads / TUBENESS_THREADS.
void set_thread_count(int n);
int thread_count();

// Runs fn(begin, end) over a static partition of [0, count) across the
// configured number of threads. Chunks are disjoint, so results are
// independent of the thread count as long as fn writes only inside its range.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace tubeness
