#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "matt/adam.hpp"
#include "matt/losses.hpp"
#include "matt/model.hpp"
#include "matt/synthetic.hpp"

namespace matt {

enum class TrainMode { Baseline1, Baseline2, Matt, MattSymmetric, MattCountOnly, MattMseOnly };

std::string to_string(TrainMode mode);
/// Accepts baseline1, baseline2, matt, matt-symmetric, matt-count-only, matt-mse-only.
TrainMode parse_mode(const std::string& name);

inline bool uses_aux_phase(TrainMode m) {
    return m == TrainMode::Matt || m == TrainMode::MattSymmetric || m == TrainMode::MattCountOnly ||
           m == TrainMode::MattMseOnly;
}

/// Per-epoch learning-rate multiplier: constant, or cosine from 1 down to
/// 0.5 (1 + cos(pi (E - 1) / E)) in the last epoch.
enum class LrSchedule { Constant, Cosine };

std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& name);
double lr_multiplier(LrSchedule s, int epoch, int epochs);

struct TrainConfig {
    TrainMode mode = TrainMode::Matt;
    int epochs = 16;
    int batch_size = 1;
    std::uint64_t seed = 0;
    LossWeights loss_weights;
    /// learning_rate applies to every mode without an entry below.
    ad::AdamConfig adam{5e-4};
    /// Per-mode learning rates (keyed by mode name), chosen on validation MAE.
    std::map<std::string, double> mode_learning_rates{{"baseline1", 1e-2}, {"baseline2", 2e-3}};
    ModelConfig model;
    /// Times each fully annotated sample appears per epoch.
    int full_repeats = 1;
    /// Also run the auxiliary phase on fully annotated samples (count = dot
    /// count). Off by default; only the "MATT on fully annotated data"
    /// ablation turns it on.
    bool aux_on_full = false;
    LrSchedule lr_schedule = LrSchedule::Constant;

    void validate() const;
    /// Base learning rate for this config's mode.
    double learning_rate() const;
    /// Loss weights after applying the mode's ablation (beta1 or beta2 zeroed).
    LossWeights effective_weights() const;
};

/// A training item: a fully annotated sample or a count-labelled image.
using SampleRef = std::variant<const FullSample*, const CountedImage*>;

struct StepReport {
    double mse = 0.0;             // sum of density MSE over full items
    double count = 0.0;           // sum of |sum F_0 - c| over weak items
    double aux_consistency = 0.0; // sum_k sum_px ((F_k*h_k) - F_0)^2
    double aux_count = 0.0;       // sum_k |sum F_k - c|
    double total = 0.0;           // weighted objective
    int n_full = 0;
    int n_weak = 0;
    /// Primary-branch count predictions (before the update) and labels.
    std::vector<double> predicted;
    std::vector<double> labels;
};

/// Owns the model and optimizer state for one run; applies the two-phase
/// update: primary phase (L_MSE + alpha L_count) on f_b and g_0, then for
/// MATT modes an auxiliary phase (L_aux) on f_b and g_1..g_K.
class Trainer {
public:
    Trainer(TrainConfig config, ModelParams params);

    /// Primary phase then, for MATT modes, the auxiliary phase.
    StepReport train_step(std::span<const SampleRef> batch);
    /// The two halves of train_step, exposed so callers can inspect the
    /// parameters in between. Neither advances steps_taken().
    void primary_phase(std::span<const SampleRef> batch, StepReport& report);
    /// No-op unless the mode has an auxiliary phase, K > 0 and the batch
    /// holds an eligible item.
    void aux_phase(std::span<const SampleRef> batch, StepReport& report);

    const ModelParams& params() const { return params_; }
    ModelParams& params() { return params_; }
    const TrainConfig& config() const { return config_; }
    long long steps_taken() const { return step_; }
    void set_learning_rate(double lr) { adam_.config.learning_rate = lr; }

private:
    struct AuxItem {
        const DenseGrid* image;
        double count;
    };
    void aux_update(std::span<const AuxItem> items, StepReport& report);
    void check_finite(double loss, const char* phase) const;

    TrainConfig config_;
    ModelParams params_;
    std::vector<ad::Tensor> tensors_;
    ad::AdamState adam_;
    std::unique_ptr<bool[]> primary_mask_;
    std::unique_ptr<bool[]> aux_mask_;
    std::unique_ptr<bool[]> all_mask_;
    long long step_ = 0;
};

struct HistoryRow {
    int epoch = 0;
    std::string split; // "train" or "val"
    double mse = 0.0;
    double count = 0.0;
    double aux_consistency = 0.0;
    double aux_count = 0.0;
    double total = 0.0;
    double mae = 0.0;
};

struct TrainResult {
    ModelParams final_params;
    ModelParams best_params; // lowest validation MAE (final params when no val split)
    int best_epoch = 0;
    double best_val_mae = 0.0;
    long long steps = 0;      // optimizer steps taken (two-phase steps count once)
    long long best_step = 0;  // steps taken when best_params was captured
    std::vector<HistoryRow> history;
    bool diverged = false;
    long long diverged_step = -1;
    std::string diverged_message;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

/// Seeded shuffling each epoch over A_F (repeated full_repeats times) and,
/// except in Baseline1, A_W. Divergence stops training and is reported in
/// the result with the history so far.
TrainResult train(const DatasetSplits& splits, const TrainConfig& config, const EpochCallback& on_epoch = {});

} // namespace matt
