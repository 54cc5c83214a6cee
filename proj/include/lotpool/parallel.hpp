// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace lotpool {

/// Runs fn(0..n-1) on up to `threads` workers. Each index runs exactly once;
/// callers write results into per-index slots so output never depends on scheduling.
/// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Explicit flag wins, then LOTPOOL_THREADS, then 1.
int resolve_threads(std::optional<int> flag);

}  // namespace lotpool
