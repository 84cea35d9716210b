#pragma once

#include <span>
#include <vector>

#include "matt/autodiff.hpp"

namespace matt::ad {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment buffers mirror the parameter list they were created for. Each slot
/// keeps its own step counter so parameters updated in only some phases get
/// the right bias correction.
struct AdamState {
    AdamConfig config;
    long long step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::vector<long long> slot_steps;

    static AdamState for_params(std::span<const Tensor> params, AdamConfig config = {});
};

/// One Adam update of every parameter, then zero their grads.
void adam_step(std::span<Tensor> params, AdamState& state);

/// As above, but parameters with active[i] == false keep their values and
/// moment slots untouched. Their grads are still cleared.
void adam_step(std::span<Tensor> params, AdamState& state, std::span<const bool> active);

} // namespace matt::ad
