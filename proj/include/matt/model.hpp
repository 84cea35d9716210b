#pragma once

#include <cstdint>
#include <vector>

#include "matt/autodiff.hpp"
#include "matt/density.hpp"

namespace matt {

enum class OutputActivation { Relu, Softplus };

struct ModelConfig {
    int in_channels = 1;
    std::vector<int> backbone_channels{16, 32, 32};
    std::vector<int> backbone_dilations{1, 1, 2};
    /// Output widths of the branch conv layers; the last must be 1.
    std::vector<int> branch_channels{16, 8, 1};
    int num_aux_branches = 4;
    std::vector<KernelSpec> kernel_bank = default_kernel_bank();
    /// Non-negative activation on every branch's density output.
    OutputActivation output_activation = OutputActivation::Relu;
    /// Density output is activation(z) * output_scale. Target densities peak
    /// near 0.04 per pixel; the small scale keeps He-initialized outputs in
    /// that range so the final ReLU does not start (and stay) dead.
    double output_scale = 0.01;
    /// Initial bias of each branch's output layer.
    double output_bias_init = 0.0;
    /// Images are fed as (x - input_shift) * input_scale.
    double input_shift = 0.5;
    double input_scale = 4.0;

    void validate() const;
    int feature_channels() const { return backbone_channels.back(); }
};

struct ConvLayer {
    ad::Tensor weight; // [Cout, Cin, 3, 3]
    ad::Tensor bias;   // [Cout]
    int dilation = 1;
};

/// Shared backbone f_b, primary branch g_0 (branches[0]) and auxiliary
/// branches g_1..g_K.
struct ModelParams {
    ModelConfig config;
    std::vector<ConvLayer> backbone;
    std::vector<std::vector<ConvLayer>> branches;

    int num_aux() const { return static_cast<int>(branches.size()) - 1; }

    /// Every parameter tensor in declaration order: backbone layers, then
    /// branch 0, 1, ..., K; weight before bias within a layer.
    std::vector<ad::Tensor> tensors() const;
    std::vector<ad::Tensor> backbone_tensors() const;
    std::vector<ad::Tensor> branch_tensors(int branch) const;

    /// Deep copy; the copy shares no storage with *this.
    ModelParams clone() const;
    bool all_finite() const;
};

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases. Each tensor draws
/// from its own named substream of `seed`, so the backbone and g_0 do not
/// depend on K.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

/// conv -> ReLU for each backbone layer; spatial size preserved.
ad::Tensor forward_features(ad::Tape& tape, const ModelParams& params, const ad::Tensor& image);

/// Branch head: 3x3 conv layers with ReLU after each, including the last.
ad::Tensor forward_branch(ad::Tape& tape, const ModelParams& params, int branch_index,
                          const ad::Tensor& features);

struct ForwardOutput {
    ad::Tensor primary;
    std::vector<ad::Tensor> aux;
};

/// One backbone pass feeding all K+1 branches.
ForwardOutput forward_all(ad::Tape& tape, const ModelParams& params, const ad::Tensor& image);

/// Backbone + primary branch only (inference path).
ad::Tensor forward_primary(ad::Tape& tape, const ModelParams& params, const ad::Tensor& image);

/// Predicted count of one image: sum of the primary density map.
double predict_count(const ModelParams& params, const DenseGrid& image);

} // namespace matt
