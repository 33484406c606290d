#pragma once

#include <cstddef>
#include <functional>

namespace bond {

/// Worker cap for sentence-parallel loops. Defaults to BOND_THREADS when set,
/// else 1. Results never depend on it.
std::size_t worker_count();
void set_worker_count(std::size_t n);

/// Calls fn(i) for i in [0, n), split into contiguous chunks across workers.
/// fn must only write to state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bond
