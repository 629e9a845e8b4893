#pragma once

#include <cstddef>
#include <functional>

namespace curvens {

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Exceptions from
/// the body are rethrown on the caller's thread (the lowest index wins).
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)> & body);

}  // namespace curvens
