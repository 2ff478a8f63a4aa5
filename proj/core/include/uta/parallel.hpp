#pragma once

#include <cstddef>
#include <functional>

namespace uta {

/// Runs fn(0) .. fn(n-1) on up to `jobs` threads. Work is handed out in
/// index order; the first exception thrown is rethrown after all workers
/// stop. jobs <= 1 runs inline.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace uta
