// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/adam.hpp"

#include <cmath>

namespace dualpix {

AdamState::AdamState(const std::vector<const Tensor *> &params, AdamConfig cfg) : config(cfg) {
    for (const Tensor *p : params) {
        m.emplace_back(p->shape);
        v.emplace_back(p->shape);
    }
}

void adam_step(AdamState &state, const std::vector<Tensor *> &params,
               const std::vector<const Tensor *> &grads) {
    if (params.size() != state.m.size() || grads.size() != params.size()) {
        throw DimensionError("adam: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(state.m[i]) || !grads[i]->same_shape(state.m[i])) {
            throw DimensionError("adam: tensor " + std::to_string(i) + " has a mismatched shape");
        }
    }
    const AdamConfig &c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double corr1 = 1.0 - std::pow(c.beta1, t);
    const double corr2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto &p = params[i]->data;
        const auto &g = grads[i]->data;
        auto &m = state.m[i].data;
        auto &v = state.v[i].data;
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
            v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
            p[k] -= c.learning_rate * (m[k] / corr1) / (std::sqrt(v[k] / corr2) + c.epsilon);
        }
    }
}

} // namespace dualpix
