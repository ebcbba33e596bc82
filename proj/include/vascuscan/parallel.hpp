#pragma once

#include <cstddef>
#include <functional>

namespace vascuscan {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is handed out by
/// an atomic counter, so callers must write results into slot i only. If any
/// call throws, the exception from the lowest index is rethrown after all
/// workers finish. jobs <= 1 runs inline in index order.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace vascuscan
