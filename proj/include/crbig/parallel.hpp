#pragma once

#include <cstddef>
#include <functional>

namespace crbig {

// Worker count used by parallel_for. 0 selects hardware concurrency.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(i) for i in [0, n). Callers write results into per-index slots
// and reduce them in index order afterwards, so output never depends on the
// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace crbig
