#include "matt/model.hpp"

#include <cmath>
#include <string>

#include "matt/rng.hpp"

namespace matt {

void ModelConfig::validate() const {
    if (in_channels < 1) throw InvalidArgument("model.in_channels must be >= 1");
    if (backbone_channels.empty()) throw InvalidArgument("model.backbone_channels must not be empty");
    if (branch_channels.empty()) throw InvalidArgument("model.branch_channels must not be empty");
    if (backbone_dilations.size() != backbone_channels.size())
        throw InvalidArgument("model.backbone_dilations must have one entry per backbone layer");
    for (int c : backbone_channels)
        if (c < 1) throw InvalidArgument("model.backbone_channels entries must be >= 1");
    for (int c : branch_channels)
        if (c < 1) throw InvalidArgument("model.branch_channels entries must be >= 1");
    for (int d : backbone_dilations)
        if (d < 1) throw InvalidArgument("model.backbone_dilations entries must be >= 1");
    if (branch_channels.back() != 1)
        throw InvalidArgument("model.branch_channels must end in 1 (single-channel density)");
    if (num_aux_branches < 0) throw InvalidArgument("model.num_aux_branches must be >= 0");
    if (static_cast<int>(kernel_bank.size()) != num_aux_branches)
        throw InvalidArgument("model.kernel_bank length (" + std::to_string(kernel_bank.size()) +
                              ") must equal num_aux_branches (" + std::to_string(num_aux_branches) + ")");
}

std::vector<ad::Tensor> ModelParams::backbone_tensors() const {
    std::vector<ad::Tensor> out;
    for (const auto& l : backbone) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    return out;
}

std::vector<ad::Tensor> ModelParams::branch_tensors(int branch) const {
    if (branch < 0 || branch >= static_cast<int>(branches.size()))
        throw InvalidArgument("branch index " + std::to_string(branch) + " out of range");
    std::vector<ad::Tensor> out;
    for (const auto& l : branches[branch]) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    return out;
}

std::vector<ad::Tensor> ModelParams::tensors() const {
    auto out = backbone_tensors();
    for (int b = 0; b < static_cast<int>(branches.size()); ++b) {
        auto t = branch_tensors(b);
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

ModelParams ModelParams::clone() const {
    ModelParams p;
    p.config = config;
    for (const auto& l : backbone) p.backbone.push_back({l.weight.clone(), l.bias.clone(), l.dilation});
    for (const auto& br : branches) {
        auto& dst = p.branches.emplace_back();
        for (const auto& l : br) dst.push_back({l.weight.clone(), l.bias.clone(), l.dilation});
    }
    return p;
}

bool ModelParams::all_finite() const {
    for (const auto& t : tensors())
        for (double v : t.data())
            if (!std::isfinite(v)) return false;
    return true;
}

namespace {

ConvLayer he_layer(int cin, int cout, int dilation, std::uint64_t seed) {
    const int k = 3;
    const double fan_in = static_cast<double>(cin) * k * k;
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    std::vector<double> w(static_cast<std::size_t>(cout) * cin * k * k);
    for (double& v : w) v = dist(rng);
    return {ad::Tensor::parameter({cout, cin, k, k}, std::move(w)),
            ad::Tensor::parameter({cout}, std::vector<double>(cout, 0.0)), dilation};
}

} // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config = config;
    int cin = config.in_channels;
    for (std::size_t i = 0; i < config.backbone_channels.size(); ++i) {
        const int cout = config.backbone_channels[i];
        p.backbone.push_back(he_layer(cin, cout, config.backbone_dilations[i],
                                      derive_seed(seed, "backbone", i)));
        cin = cout;
    }
    for (int b = 0; b <= config.num_aux_branches; ++b) {
        auto& layers = p.branches.emplace_back();
        int bc = config.feature_channels();
        const std::string stream = "branch" + std::to_string(b);
        for (std::size_t i = 0; i < config.branch_channels.size(); ++i) {
            const int cout = config.branch_channels[i];
            layers.push_back(he_layer(bc, cout, 1, derive_seed(seed, stream, i)));
            bc = cout;
        }
        for (double& v : layers.back().bias.mutable_data()) v = config.output_bias_init;
    }
    return p;
}

ad::Tensor forward_features(ad::Tape& tape, const ModelParams& params, const ad::Tensor& image) {
    if (image.shape().size() != 3 || image.dim(0) != params.config.in_channels)
        throw InvalidArgument("forward_features: image must be [" +
                              std::to_string(params.config.in_channels) + ",H,W]");
    ad::Tensor x = image;
    if (params.config.input_shift != 0.0) x = tape.shift(x, -params.config.input_shift);
    if (params.config.input_scale != 1.0) x = tape.scale(x, params.config.input_scale);
    for (const auto& l : params.backbone) x = tape.relu(tape.conv2d(x, l.weight, l.bias, l.dilation));
    return x;
}

ad::Tensor forward_branch(ad::Tape& tape, const ModelParams& params, int branch_index,
                          const ad::Tensor& features) {
    if (branch_index < 0 || branch_index >= static_cast<int>(params.branches.size()))
        throw InvalidArgument("forward_branch: index " + std::to_string(branch_index) +
                              " out of range 0.." + std::to_string(params.num_aux()));
    const auto& layers = params.branches[branch_index];
    ad::Tensor x = features;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        x = tape.relu(tape.conv2d(x, layers[i].weight, layers[i].bias, layers[i].dilation));
    x = tape.conv2d(x, layers.back().weight, layers.back().bias, layers.back().dilation);
    x = params.config.output_activation == OutputActivation::Relu ? tape.relu(x) : tape.softplus(x);
    return params.config.output_scale == 1.0 ? x : tape.scale(x, params.config.output_scale);
}

ForwardOutput forward_all(ad::Tape& tape, const ModelParams& params, const ad::Tensor& image) {
    const ad::Tensor features = forward_features(tape, params, image);
    ForwardOutput out;
    out.primary = forward_branch(tape, params, 0, features);
    for (int k = 1; k <= params.num_aux(); ++k) out.aux.push_back(forward_branch(tape, params, k, features));
    return out;
}

ad::Tensor forward_primary(ad::Tape& tape, const ModelParams& params, const ad::Tensor& image) {
    return forward_branch(tape, params, 0, forward_features(tape, params, image));
}

double predict_count(const ModelParams& params, const DenseGrid& image) {
    ad::Tape tape;
    const auto input = ad::Tensor::constant(image);
    return tape.sum_all(forward_primary(tape, params, input)).item();
}

} // namespace matt
