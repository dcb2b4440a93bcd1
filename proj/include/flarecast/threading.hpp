#pragma once

#include <cstddef>
#include <functional>

namespace flarecast {

/// Number of worker threads to use: `requested` if positive, otherwise the
/// FLARECAST_THREADS environment variable, otherwise the hardware count.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, count) across up to `threads` workers.
/// Iterations must be independent; any exception is rethrown on the caller.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace flarecast
