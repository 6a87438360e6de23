// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace dualpix {

/// Worker count used by parallel_for. Defaults to DUALPIX_THREADS when set,
/// otherwise the hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n) split into contiguous blocks. Each index must
/// write only its own outputs, so results do not depend on the partition.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace dualpix
