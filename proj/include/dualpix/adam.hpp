// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/micronet.hpp"

#include <cstdint>
#include <vector>

namespace dualpix {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment buffers for a fixed list of parameter tensors.
struct AdamState {
    AdamConfig config;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;

    AdamState() = default;
    AdamState(const std::vector<const Tensor *> &params, AdamConfig cfg = {});
};

/// One bias-corrected Adam update. Throws DimensionError on shape mismatch.
void adam_step(AdamState &state, const std::vector<Tensor *> &params,
               const std::vector<const Tensor *> &grads);

} // namespace dualpix
