#pragma once

#include <optional>
#include <span>
#include <vector>

#include "matt/autodiff.hpp"
#include "matt/density.hpp"

namespace matt {

struct LossWeights {
    double alpha = 1e-2; // count loss on the primary branch
    double beta1 = 1.0;  // auxiliary consistency
    double beta2 = 1e-2; // auxiliary count

    void validate() const;
};

/// Sum over pixels of (F - D)^2.
ad::Tensor mse_density_loss(ad::Tape& tape, const ad::Tensor& prediction, const DensityGrid& truth);

/// |sum(F) - c|.
ad::Tensor count_loss(ad::Tape& tape, const ad::Tensor& prediction, double count);

/// beta1 * sum_k sum_px ((F_k * h_k) - sg(F_0))^2 + beta2 * sum_k |sum(F_k) - c|.
/// F_0 enters only through a detach unless `symmetric` is set.
ad::Tensor aux_loss(ad::Tape& tape, std::span<const ad::Tensor> aux_maps, const ad::Tensor& primary,
                    std::span<const KernelSpec> kernel_bank, double count, const LossWeights& w,
                    bool symmetric = false);

struct AuxTerms {
    double consistency = 0.0; // sum_k sum_px ((F_k * h_k) - F_0)^2
    double count = 0.0;       // sum_k |sum F_k - c|
};

/// Unweighted aux_loss terms evaluated on tensor values, outside any graph.
AuxTerms aux_terms(std::span<const ad::Tensor> aux_maps, const ad::Tensor& primary,
                   std::span<const KernelSpec> kernel_bank, double count);

/// One batch item's contribution to L_Base: a density target for fully
/// annotated items, a count target for weakly annotated ones.
struct BaseLossItem {
    ad::Tensor prediction;
    std::optional<DensityGrid> density;
    std::optional<double> count;
};

/// Sum of mse_density_loss over full items plus alpha * count_loss over weak items.
ad::Tensor base_loss(ad::Tape& tape, std::span<const BaseLossItem> batch, const LossWeights& w);

} // namespace matt
