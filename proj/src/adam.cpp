#include "matt/adam.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace matt::ad {

AdamState AdamState::for_params(std::span<const Tensor> params, AdamConfig config) {
    if (!(config.learning_rate > 0) || !(config.beta1 > 0 && config.beta1 < 1) ||
        !(config.beta2 > 0 && config.beta2 < 1) || !(config.epsilon > 0))
        throw InvalidArgument("adam: learning_rate/epsilon must be positive and betas in (0,1)");
    AdamState s;
    s.config = config;
    for (const Tensor& p : params) {
        s.first_moment.emplace_back(p.size(), 0.0);
        s.second_moment.emplace_back(p.size(), 0.0);
        s.slot_steps.push_back(0);
    }
    return s;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
    // std::vector<bool> is not contiguous, so use a plain array.
    auto active = std::make_unique<bool[]>(params.size());
    std::fill_n(active.get(), params.size(), true);
    adam_step(params, state, std::span<const bool>(active.get(), params.size()));
}

void adam_step(std::span<Tensor> params, AdamState& state, std::span<const bool> active) {
    if (params.size() != state.first_moment.size() || active.size() != params.size())
        throw InvalidArgument("adam_step: state has " + std::to_string(state.first_moment.size()) +
                              " slots for " + std::to_string(params.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].size() != state.first_moment[i].size() ||
            params[i].size() != state.second_moment[i].size())
            throw InvalidArgument("adam_step: slot " + std::to_string(i) +
                                  " does not match its parameter's shape");

    const AdamConfig& c = state.config;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (active[i]) {
            const long long t = ++state.slot_steps[i];
            const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
            auto data = p.mutable_data();
            const auto grad = p.grad();
            auto& m = state.first_moment[i];
            auto& v = state.second_moment[i];
            for (std::size_t j = 0; j < data.size(); ++j) {
                const double g = grad[j];
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                const double m_hat = m[j] / bc1;
                const double v_hat = v[j] / bc2;
                data[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
            }
        }
        p.zero_grad();
    }
    ++state.step_count;
}

} // namespace matt::ad
