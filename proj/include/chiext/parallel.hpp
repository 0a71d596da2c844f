#pragma once

#include <cstddef>
#include <functional>

namespace chiext {

/// Worker count for `requested` (0 = hardware concurrency), capped by the
/// CHI_EXTREMES_THREADS environment variable when set.
unsigned resolve_parallelism(unsigned requested);

/// Calls body(i) for every i in [0, n) on up to `parallelism` threads.
/// Work is handed out dynamically; results must be written to slots owned
/// by i so the outcome does not depend on scheduling. If any call throws,
/// the remaining work is abandoned and a ReplicationError for the lowest
/// failing index is raised.
void parallel_for(std::size_t n, unsigned parallelism,
                  const std::function<void(std::size_t)>& body);

}  // namespace chiext
