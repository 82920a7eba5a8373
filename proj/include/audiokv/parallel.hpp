// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <functional>

namespace audiokv {

/// Number of worker threads to use. Reads AUDIOKV_THREADS (0 or unset means
/// hardware concurrency) and never returns less than 1.
std::size_t worker_threads();

/// Runs body(i) for i in [0, count) on up to worker_threads() threads.
/// Each index is visited exactly once; callers write to disjoint slots so the
/// result does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace audiokv
