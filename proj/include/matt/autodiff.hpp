#pragma once

// Define-by-run reverse-mode differentiation over small dense tensors.
//
// Trainable parameters and constants are leaves that live outside any tape.
// Every operation applied through a Tape appends a node to that tape; a tape
// supports a single backward pass, after which a new forward pass (new tape)
// is required.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "matt/grid.hpp"

namespace matt::ad {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::uint64_t tape_id = 0; // 0 for leaves
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;
};

class Tensor {
public:
    Tensor() = default;

    /// Trainable leaf.
    static Tensor parameter(Shape shape, std::vector<double> data);
    /// Non-trainable leaf.
    static Tensor constant(Shape shape, std::vector<double> data);
    static Tensor constant(const DenseGrid& grid); // shape [1, rows, cols]

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->data.size(); }
    int dim(std::size_t i) const { return node_->shape.at(i); }

    std::span<const double> data() const { return node_->data; }
    std::span<double> mutable_data() { return node_->data; }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad; }

    bool requires_grad() const { return node_->requires_grad; }
    std::uint64_t tape_id() const { return node_->tape_id; }
    bool is_leaf() const { return node_->tape_id == 0; }

    /// Value of a one-element tensor.
    double item() const;
    void zero_grad();
    /// Deep copy as a leaf with the same trainable flag; grad is zeroed.
    Tensor clone() const;
    /// Spatial channel c of a [C,H,W] tensor as a grid (copy).
    DenseGrid channel(int c) const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    std::shared_ptr<Node> node_;
    friend class Tape;
};

class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::uint64_t id() const { return id_; }
    std::size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

    /// Stride-1 cross-correlation with zero "same" padding.
    /// input [Cin,H,W], weight [Cout,Cin,kH,kW] with odd kH,kW, bias [Cout].
    Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation = 1);
    /// Single-channel convolution with a fixed kernel (no kernel gradient).
    Tensor kernel_convolve(const Tensor& input, const DenseGrid& kernel);

    Tensor relu(const Tensor& x);
    /// log(1 + exp(x)), computed stably.
    Tensor softplus(const Tensor& x);
    Tensor sum_all(const Tensor& x);
    Tensor abs_scalar(const Tensor& x);
    /// Sum over all elements of (a - b)^2.
    Tensor sq_diff_sum(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& x, double c);
    /// x + c elementwise.
    Tensor shift(const Tensor& x, double c);
    Tensor add(const Tensor& a, const Tensor& b);
    /// Same data, cut out of the graph.
    Tensor detach(const Tensor& x);

    /// Reverse accumulation from a scalar. Zeroes every reachable grad first.
    void backward(const Tensor& loss);

private:
    Tensor make_node(Shape shape, std::vector<double> data,
                     std::vector<std::shared_ptr<Node>> parents);
    void check_owned(const Tensor& t, const char* op) const;

    std::uint64_t id_;
    std::vector<std::shared_ptr<Node>> nodes_;
    bool backward_done_ = false;
};

} // namespace matt::ad
