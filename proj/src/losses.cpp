#include "matt/losses.hpp"

#include <cmath>
#include <string>

namespace matt {

void LossWeights::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!ok(alpha)) throw InvalidArgument("loss_weights.alpha must be finite and non-negative");
    if (!ok(beta1)) throw InvalidArgument("loss_weights.beta1 must be finite and non-negative");
    if (!ok(beta2)) throw InvalidArgument("loss_weights.beta2 must be finite and non-negative");
}

ad::Tensor mse_density_loss(ad::Tape& tape, const ad::Tensor& prediction, const DensityGrid& truth) {
    if (prediction.shape() != ad::Shape{1, truth.rows, truth.cols})
        throw InvalidArgument("mse_density_loss: prediction must be [1," + std::to_string(truth.rows) +
                              "," + std::to_string(truth.cols) + "]");
    return tape.sq_diff_sum(prediction, ad::Tensor::constant(truth));
}

ad::Tensor count_loss(ad::Tape& tape, const ad::Tensor& prediction, double count) {
    if (!(count >= 0.0)) throw InvalidArgument("count_loss: count must be non-negative");
    return tape.abs_scalar(tape.shift(tape.sum_all(prediction), -count));
}

ad::Tensor aux_loss(ad::Tape& tape, std::span<const ad::Tensor> aux_maps, const ad::Tensor& primary,
                    std::span<const KernelSpec> kernel_bank, double count, const LossWeights& w,
                    bool symmetric) {
    if (aux_maps.empty()) throw InvalidArgument("aux_loss: needs at least one auxiliary map");
    if (aux_maps.size() != kernel_bank.size())
        throw InvalidArgument("aux_loss: " + std::to_string(aux_maps.size()) + " auxiliary maps but " +
                              std::to_string(kernel_bank.size()) + " kernels");
    for (const auto& f : aux_maps)
        if (f.shape() != primary.shape()) throw InvalidArgument("aux_loss: map size mismatch");

    const ad::Tensor target = symmetric ? primary : tape.detach(primary);
    ad::Tensor consistency;
    ad::Tensor counts;
    for (std::size_t k = 0; k < aux_maps.size(); ++k) {
        const ad::Tensor blurred = tape.kernel_convolve(aux_maps[k], kernel_bank[k].weights);
        const ad::Tensor c = tape.sq_diff_sum(blurred, target);
        const ad::Tensor n = count_loss(tape, aux_maps[k], count);
        consistency = consistency.defined() ? tape.add(consistency, c) : c;
        counts = counts.defined() ? tape.add(counts, n) : n;
    }
    return tape.add(tape.scale(consistency, w.beta1), tape.scale(counts, w.beta2));
}

AuxTerms aux_terms(std::span<const ad::Tensor> aux_maps, const ad::Tensor& primary,
                   std::span<const KernelSpec> kernel_bank, double count) {
    if (aux_maps.size() != kernel_bank.size()) throw InvalidArgument("aux_terms: length mismatch");
    AuxTerms t;
    const int h = primary.dim(1), w = primary.dim(2);
    const auto f0 = primary.data();
    for (std::size_t k = 0; k < aux_maps.size(); ++k) {
        const auto fk = aux_maps[k].data();
        const DenseGrid& ker = kernel_bank[k].weights;
        const int ry = ker.rows / 2, rx = ker.cols / 2;
        double total = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int ky = 0; ky < ker.rows; ++ky) {
                    const int sy = y + ky - ry;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < ker.cols; ++kx) {
                        const int sx = x + kx - rx;
                        if (sx >= 0 && sx < w) acc += ker.at(ky, kx) * fk[sy * w + sx];
                    }
                }
                const double d = acc - f0[y * w + x];
                t.consistency += d * d;
                total += fk[y * w + x];
            }
        t.count += std::abs(total - count);
    }
    return t;
}

ad::Tensor base_loss(ad::Tape& tape, std::span<const BaseLossItem> batch, const LossWeights& w) {
    if (batch.empty()) throw InvalidArgument("base_loss: empty batch");
    ad::Tensor total;
    for (const auto& item : batch) {
        ad::Tensor term;
        if (item.density && !item.count) {
            term = mse_density_loss(tape, item.prediction, *item.density);
        } else if (item.count && !item.density) {
            term = tape.scale(count_loss(tape, item.prediction, *item.count), w.alpha);
        } else {
            throw InvalidArgument("base_loss: each item needs exactly one of density or count");
        }
        total = total.defined() ? tape.add(total, term) : term;
    }
    return total;
}

} // namespace matt
