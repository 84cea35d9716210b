#include "matt/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace matt::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::atomic<std::uint64_t> next_tape_id{1};

// Per-thread patch buffers for conv2d; grown on demand, never shrunk.
// n == 0 returns the current buffer without resizing.
double* scratch(int slot, std::size_t n) {
    thread_local std::vector<double> buffers[2];
    auto& b = buffers[slot];
    if (b.size() < n) b.resize(n);
    return b.data();
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Unrolls input patches into a (Cin*kH*kW) x (H*W) matrix.
void im2col(const double* in, int channels, int height, int width, int kh, int kw,
            int dilation, double* col) {
    const int pad_y = dilation * (kh - 1) / 2;
    const int pad_x = dilation * (kw - 1) / 2;
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    std::size_t row = 0;
    for (int c = 0; c < channels; ++c) {
        const double* src = in + c * plane;
        for (int ky = 0; ky < kh; ++ky) {
            const int dy = ky * dilation - pad_y;
            for (int kx = 0; kx < kw; ++kx, ++row) {
                const int dx = kx * dilation - pad_x;
                double* dst = col + row * plane;
                const int x_lo = std::max(0, -dx);
                const int x_hi = std::min(width, width - dx);
                for (int y = 0; y < height; ++y) {
                    double* out_row = dst + static_cast<std::size_t>(y) * width;
                    const int sy = y + dy;
                    if (sy < 0 || sy >= height || x_lo >= x_hi) {
                        std::fill(out_row, out_row + width, 0.0);
                        continue;
                    }
                    std::fill(out_row, out_row + x_lo, 0.0);
                    const double* src_row = src + static_cast<std::size_t>(sy) * width + dx;
                    std::copy(src_row + x_lo, src_row + x_hi, out_row + x_lo);
                    std::fill(out_row + x_hi, out_row + width, 0.0);
                }
            }
        }
    }
}

// Adjoint of im2col: scatters column gradients back onto the input gradient.
void col2im_add(const double* col, int channels, int height, int width, int kh, int kw,
                int dilation, double* in_grad) {
    const int pad_y = dilation * (kh - 1) / 2;
    const int pad_x = dilation * (kw - 1) / 2;
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    std::size_t row = 0;
    for (int c = 0; c < channels; ++c) {
        double* dst = in_grad + c * plane;
        for (int ky = 0; ky < kh; ++ky) {
            const int dy = ky * dilation - pad_y;
            for (int kx = 0; kx < kw; ++kx, ++row) {
                const int dx = kx * dilation - pad_x;
                const double* src = col + row * plane;
                const int x_lo = std::max(0, -dx);
                const int x_hi = std::min(width, width - dx);
                for (int y = 0; y < height; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= height) continue;
                    const double* src_row = src + static_cast<std::size_t>(y) * width;
                    double* dst_row = dst + static_cast<std::size_t>(sy) * width + dx;
                    for (int x = x_lo; x < x_hi; ++x) dst_row[x] += src_row[x];
                }
            }
        }
    }
}

} // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw InvalidArgument("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

// ---------------------------------------------------------------- Tensor

namespace {
std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool trainable) {
    if (shape_size(shape) != data.size())
        throw InvalidArgument("tensor data length " + std::to_string(data.size()) +
                              " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->grad.assign(data.size(), 0.0);
    n->data = std::move(data);
    n->requires_grad = trainable;
    return n;
}
} // namespace

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
    return Tensor(make_leaf(std::move(shape), std::move(data), true));
}

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
    return Tensor(make_leaf(std::move(shape), std::move(data), false));
}

Tensor Tensor::constant(const DenseGrid& grid) {
    return constant({1, grid.rows, grid.cols}, grid.values);
}

double Tensor::item() const {
    if (size() != 1) throw InvalidArgument("item() on non-scalar tensor " + shape_str(shape()));
    return node_->data[0];
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::clone() const {
    return Tensor(make_leaf(node_->shape, node_->data, node_->requires_grad));
}

DenseGrid Tensor::channel(int c) const {
    if (shape().size() != 3) throw InvalidArgument("channel() needs a [C,H,W] tensor");
    const int h = dim(1), w = dim(2);
    if (c < 0 || c >= dim(0)) throw InvalidArgument("channel index out of range");
    const auto plane = static_cast<std::size_t>(h) * w;
    std::vector<double> v(node_->data.begin() + c * plane, node_->data.begin() + (c + 1) * plane);
    return DenseGrid(h, w, std::move(v));
}

// ---------------------------------------------------------------- Tape

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

void Tape::check_owned(const Tensor& t, const char* op) const {
    if (!t.defined()) throw InvalidArgument(std::string(op) + ": undefined tensor");
    if (t.tape_id() != 0 && t.tape_id() != id_)
        throw InvalidArgument(std::string(op) + ": tensor belongs to a different tape");
}

Tensor Tape::make_node(Shape shape, std::vector<double> data,
                       std::vector<std::shared_ptr<Node>> parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->grad.assign(data.size(), 0.0);
    n->data = std::move(data);
    n->tape_id = id_;
    n->requires_grad = std::any_of(parents.begin(), parents.end(),
                                   [](const auto& p) { return p->requires_grad; });
    n->parents = std::move(parents);
    nodes_.push_back(n);
    return Tensor(n);
}

Tensor Tape::conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation) {
    check_owned(input, "conv2d");
    check_owned(weight, "conv2d");
    check_owned(bias, "conv2d");
    if (input.shape().size() != 3) throw InvalidArgument("conv2d: input must be [C,H,W]");
    if (weight.shape().size() != 4) throw InvalidArgument("conv2d: weight must be [Cout,Cin,kH,kW]");
    if (dilation < 1) throw InvalidArgument("conv2d: dilation must be >= 1");
    const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(1) != cin)
        throw InvalidArgument("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                              " input channels, input has " + std::to_string(cin));
    if (kh % 2 == 0 || kw % 2 == 0) throw InvalidArgument("conv2d: kernel sides must be odd");
    if (bias.shape() != Shape{cout}) throw InvalidArgument("conv2d: bias must be [Cout]");

    const auto hw = static_cast<Eigen::Index>(h) * w;
    const auto patch = static_cast<Eigen::Index>(cin) * kh * kw;
    {
        double* col = scratch(0, static_cast<std::size_t>(patch * hw));
        im2col(input.data().data(), cin, h, w, kh, kw, dilation, col);
    }

    std::vector<double> out(static_cast<std::size_t>(cout) * hw);
    MapMat y(out.data(), cout, hw);
    ConstMapMat wmat(weight.data().data(), cout, patch);
    y.noalias() = wmat * ConstMapMat(scratch(0, 0), patch, hw);
    const auto b = bias.data();
    for (int o = 0; o < cout; ++o) y.row(o).array() += b[o];

    Tensor result = make_node({cout, h, w}, std::move(out), {input.node_, weight.node_, bias.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* in = input.node_.get();
        Node* wt = weight.node_.get();
        Node* bs = bias.node_.get();
        self->backward_fn = [=]() {
            ConstMapMat dy(self->grad.data(), cout, hw);
            if (wt->requires_grad) {
                // Patches are rebuilt rather than kept alive for the whole tape.
                double* col = scratch(0, static_cast<std::size_t>(patch * hw));
                im2col(in->data.data(), cin, h, w, kh, kw, dilation, col);
                MapMat dw(wt->grad.data(), cout, patch);
                dw.noalias() += dy * ConstMapMat(col, patch, hw).transpose();
            }
            if (bs->requires_grad) {
                // Plain loop: Eigen's vectorized reduction order depends on
                // buffer alignment, which would make runs non-reproducible.
                for (int o = 0; o < cout; ++o) {
                    const double* row = self->grad.data() + static_cast<std::size_t>(o) * hw;
                    double s = 0.0;
                    for (Eigen::Index i = 0; i < hw; ++i) s += row[i];
                    bs->grad[o] += s;
                }
            }
            if (in->requires_grad) {
                ConstMapMat wm(wt->data.data(), cout, patch);
                double* dcol = scratch(1, static_cast<std::size_t>(patch * hw));
                MapMat(dcol, patch, hw).noalias() = wm.transpose() * dy;
                col2im_add(dcol, cin, h, w, kh, kw, dilation, in->grad.data());
            }
        };
    }
    return result;
}

Tensor Tape::kernel_convolve(const Tensor& input, const DenseGrid& kernel) {
    check_owned(input, "kernel_convolve");
    if (input.shape().size() != 3 || input.dim(0) != 1)
        throw InvalidArgument("kernel_convolve: input must be [1,H,W]");
    if (kernel.rows % 2 == 0 || kernel.cols % 2 == 0 || kernel.rows < 1 || kernel.cols < 1)
        throw InvalidArgument("kernel_convolve: kernel sides must be odd");
    const int h = input.dim(1), w = input.dim(2);
    const int ry = kernel.rows / 2, rx = kernel.cols / 2;
    const auto x = input.data();
    std::vector<double> out(x.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
            double acc = 0.0;
            for (int ky = 0; ky < kernel.rows; ++ky) {
                const int sy = y + ky - ry;
                if (sy < 0 || sy >= h) continue;
                for (int kx = 0; kx < kernel.cols; ++kx) {
                    const int sx = xx + kx - rx;
                    if (sx < 0 || sx >= w) continue;
                    acc += kernel.at(ky, kx) * x[static_cast<std::size_t>(sy) * w + sx];
                }
            }
            out[static_cast<std::size_t>(y) * w + xx] = acc;
        }
    }
    Tensor result = make_node({1, h, w}, std::move(out), {input.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* in = input.node_.get();
        self->backward_fn = [=]() {
            for (int y = 0; y < h; ++y) {
                for (int xx = 0; xx < w; ++xx) {
                    const double g = self->grad[static_cast<std::size_t>(y) * w + xx];
                    if (g == 0.0) continue;
                    for (int ky = 0; ky < kernel.rows; ++ky) {
                        const int sy = y + ky - ry;
                        if (sy < 0 || sy >= h) continue;
                        for (int kx = 0; kx < kernel.cols; ++kx) {
                            const int sx = xx + kx - rx;
                            if (sx < 0 || sx >= w) continue;
                            in->grad[static_cast<std::size_t>(sy) * w + sx] += g * kernel.at(ky, kx);
                        }
                    }
                }
            }
        };
    }
    return result;
}

Tensor Tape::relu(const Tensor& x) {
    check_owned(x, "relu");
    std::vector<double> out(x.data().begin(), x.data().end());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    Tensor result = make_node(x.shape(), std::move(out), {x.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* in = x.node_.get();
        self->backward_fn = [self, in]() {
            for (std::size_t i = 0; i < in->data.size(); ++i)
                if (in->data[i] > 0.0) in->grad[i] += self->grad[i];
        };
    }
    return result;
}

Tensor Tape::softplus(const Tensor& x) {
    check_owned(x, "softplus");
    std::vector<double> out(x.data().begin(), x.data().end());
    for (double& v : out) v = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    Tensor result = make_node(x.shape(), std::move(out), {x.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* in = x.node_.get();
        self->backward_fn = [self, in]() {
            for (std::size_t i = 0; i < in->data.size(); ++i) {
                const double v = in->data[i];
                const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
                in->grad[i] += sig * self->grad[i];
            }
        };
    }
    return result;
}

Tensor Tape::sum_all(const Tensor& x) {
    check_owned(x, "sum_all");
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor result = make_node({}, {s}, {x.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* in = x.node_.get();
        self->backward_fn = [self, in]() {
            const double g = self->grad[0];
            for (double& gi : in->grad) gi += g;
        };
    }
    return result;
}

Tensor Tape::abs_scalar(const Tensor& x) {
    check_owned(x, "abs_scalar");
    if (x.size() != 1) throw InvalidArgument("abs_scalar: input must have one element");
    const double v = x.data()[0];
    Tensor result = make_node({}, {std::abs(v)}, {x.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* in = x.node_.get();
        self->backward_fn = [self, in]() {
            const double v = in->data[0];
            const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
            in->grad[0] += sign * self->grad[0];
        };
    }
    return result;
}

Tensor Tape::sq_diff_sum(const Tensor& a, const Tensor& b) {
    check_owned(a, "sq_diff_sum");
    check_owned(b, "sq_diff_sum");
    if (a.shape() != b.shape())
        throw InvalidArgument("sq_diff_sum: shape mismatch " + shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
    double s = 0.0;
    const auto ad = a.data(), bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
        const double d = ad[i] - bd[i];
        s += d * d;
    }
    Tensor result = make_node({}, {s}, {a.node_, b.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* pa = a.node_.get();
        Node* pb = b.node_.get();
        self->backward_fn = [self, pa, pb]() {
            const double g = 2.0 * self->grad[0];
            for (std::size_t i = 0; i < pa->data.size(); ++i) {
                const double d = g * (pa->data[i] - pb->data[i]);
                if (pa->requires_grad) pa->grad[i] += d;
                if (pb->requires_grad) pb->grad[i] -= d;
            }
        };
    }
    return result;
}

Tensor Tape::scale(const Tensor& x, double c) {
    check_owned(x, "scale");
    std::vector<double> out(x.data().begin(), x.data().end());
    for (double& v : out) v *= c;
    Tensor result = make_node(x.shape(), std::move(out), {x.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* in = x.node_.get();
        self->backward_fn = [self, in, c]() {
            for (std::size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += c * self->grad[i];
        };
    }
    return result;
}

Tensor Tape::shift(const Tensor& x, double c) {
    check_owned(x, "shift");
    std::vector<double> out(x.data().begin(), x.data().end());
    for (double& v : out) v += c;
    Tensor result = make_node(x.shape(), std::move(out), {x.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* in = x.node_.get();
        self->backward_fn = [self, in]() {
            for (std::size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += self->grad[i];
        };
    }
    return result;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    check_owned(a, "add");
    check_owned(b, "add");
    if (a.shape() != b.shape())
        throw InvalidArgument("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
    std::vector<double> out(a.data().begin(), a.data().end());
    const auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    Tensor result = make_node(a.shape(), std::move(out), {a.node_, b.node_});
    if (result.requires_grad()) {
        Node* self = result.node_.get();
        Node* pa = a.node_.get();
        Node* pb = b.node_.get();
        self->backward_fn = [self, pa, pb]() {
            for (std::size_t i = 0; i < self->grad.size(); ++i) {
                if (pa->requires_grad) pa->grad[i] += self->grad[i];
                if (pb->requires_grad) pb->grad[i] += self->grad[i];
            }
        };
    }
    return result;
}

Tensor Tape::detach(const Tensor& x) {
    check_owned(x, "detach");
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_node(x.shape(), std::move(out), {});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined()) throw InvalidArgument("backward: undefined loss");
    if (loss.size() != 1)
        throw InvalidArgument("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    if (loss.tape_id() != id_) throw InvalidArgument("backward: loss is not a node of this tape");
    if (backward_done_)
        throw std::logic_error("backward: already run on this tape; rebuild the forward pass");
    backward_done_ = true;

    // Only nodes the loss depends on are visited; leaves outside that set
    // keep whatever grad they had.
    auto it = std::find(nodes_.begin(), nodes_.end(), loss.node_);
    std::unordered_set<const Node*> reachable{it->get()};
    for (auto r = std::make_reverse_iterator(std::next(it)); r != nodes_.rend(); ++r) {
        if (!reachable.contains(r->get())) continue;
        for (const auto& p : (*r)->parents) reachable.insert(p.get());
    }
    for (const auto& n : nodes_) {
        std::fill(n->grad.begin(), n->grad.end(), 0.0);
        for (const auto& p : n->parents)
            if (p->tape_id == 0 && reachable.contains(p.get())) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }
    if (!loss.requires_grad()) return;

    it->get()->grad[0] = 1.0;
    for (auto r = std::make_reverse_iterator(std::next(it)); r != nodes_.rend(); ++r) {
        Node& n = **r;
        if (reachable.contains(&n) && n.requires_grad && n.backward_fn) n.backward_fn();
    }
}

} // namespace matt::ad
