#pragma once

#include <functional>

namespace klrom {

/// Worker count: KLROM_THREADS if set and positive, otherwise the hardware concurrency.
int thread_count();

/// Calls body(i, worker) for i in [0, n); worker is in [0, thread_count()).
/// Exceptions thrown by the body are rethrown on the calling thread (first one wins).
void parallel_for(int n, const std::function<void(int, int)>& body);

}  // namespace klrom
