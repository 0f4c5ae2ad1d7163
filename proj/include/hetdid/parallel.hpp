#pragma once

#include <functional>

namespace hetdid {

// Worker count: HETDID_THREADS when set to a positive integer, otherwise the
// hardware concurrency.
int default_threads();

// Runs fn(0..n-1) on up to `threads` workers (0 = default_threads()). Results
// must be written to per-index slots; the first exception is rethrown.
// Calls made from inside a worker run serially.
void parallel_for(int n, const std::function<void(int)>& fn, int threads = 0);

}  // namespace hetdid
