#pragma once

#include <cstddef>
#include <functional>

namespace lgpc {

/// Upper bound on worker threads used by parallel sweeps (0 = hardware concurrency).
void set_max_threads(unsigned n);
[[nodiscard]] unsigned max_threads();

/// Runs body(i) for i in [0, count). Each index is visited exactly once; the
/// body must only write to state owned by index i. The first exception thrown
/// by any worker is rethrown on the calling thread. Calls nested inside a
/// body run sequentially on the worker.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace lgpc
