#pragma once

#include <cstddef>
#include <functional>

namespace rflego {

/// Worker count used when a call passes threads <= 0. Initialized from
/// RFLEGO_THREADS if set, otherwise std::thread::hardware_concurrency().
int default_threads();
void set_default_threads(int threads);

/// Runs body(i) for i in [0, n). Each index is processed exactly once; results
/// must be written to per-index slots so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace rflego
