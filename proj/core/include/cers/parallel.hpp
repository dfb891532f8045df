// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace cers {

/// Worker cap: CERS_THREADS when set (>= 1), otherwise hardware concurrency.
int thread_cap();

/// Runs body(i) for i in [0, n) on up to thread_cap() workers. Bodies must
/// write only to per-index slots so the schedule cannot change the result.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cers
