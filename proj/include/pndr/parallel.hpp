#pragma once

#include <cstddef>
#include <functional>

namespace pndr {

/// Worker count used by pixel-parallel loops; defaults to hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, count) on up to thread_count() threads. Each index
/// is handled by exactly one thread; results must not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace pndr
