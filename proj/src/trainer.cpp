#include "matt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "matt/evaluation.hpp"
#include "matt/rng.hpp"

namespace matt {

std::string to_string(TrainMode mode) {
    switch (mode) {
    case TrainMode::Baseline1: return "baseline1";
    case TrainMode::Baseline2: return "baseline2";
    case TrainMode::Matt: return "matt";
    case TrainMode::MattSymmetric: return "matt-symmetric";
    case TrainMode::MattCountOnly: return "matt-count-only";
    case TrainMode::MattMseOnly: return "matt-mse-only";
    }
    return "unknown";
}

TrainMode parse_mode(const std::string& name) {
    for (auto m : {TrainMode::Baseline1, TrainMode::Baseline2, TrainMode::Matt, TrainMode::MattSymmetric,
                   TrainMode::MattCountOnly, TrainMode::MattMseOnly})
        if (to_string(m) == name) return m;
    throw InvalidArgument("unknown training mode '" + name +
                          "' (expected baseline1, baseline2, matt, matt-symmetric, matt-count-only, matt-mse-only)");
}

std::string to_string(LrSchedule s) { return s == LrSchedule::Cosine ? "cosine" : "constant"; }

LrSchedule parse_lr_schedule(const std::string& name) {
    if (name == "constant") return LrSchedule::Constant;
    if (name == "cosine") return LrSchedule::Cosine;
    throw InvalidArgument("unknown lr_schedule '" + name + "' (expected constant or cosine)");
}

double lr_multiplier(LrSchedule s, int epoch, int epochs) {
    if (s == LrSchedule::Constant) return 1.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * (epoch - 1) / epochs));
}

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidArgument("train.epochs must be >= 1");
    if (batch_size < 1) throw InvalidArgument("train.batch_size must be >= 1");
    if (full_repeats < 1) throw InvalidArgument("train.full_repeats must be >= 1");
    loss_weights.validate();
    model.validate();
    ad::AdamState::for_params({}, adam); // validates hyper-parameters
    for (const auto& [mode, lr] : mode_learning_rates) {
        parse_mode(mode);
        if (!(lr > 0.0) || !std::isfinite(lr))
            throw InvalidArgument("train.mode_learning_rates." + mode + " must be positive");
    }
}

double TrainConfig::learning_rate() const {
    const auto it = mode_learning_rates.find(to_string(mode));
    return it == mode_learning_rates.end() ? adam.learning_rate : it->second;
}

LossWeights TrainConfig::effective_weights() const {
    LossWeights w = loss_weights;
    if (mode == TrainMode::MattCountOnly) w.beta1 = 0.0;
    if (mode == TrainMode::MattMseOnly) w.beta2 = 0.0;
    return w;
}

namespace {
std::unique_ptr<bool[]> make_mask(std::size_t n, auto&& pred) {
    auto m = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = pred(i);
    return m;
}
} // namespace

Trainer::Trainer(TrainConfig config, ModelParams params)
    : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    tensors_ = params_.tensors();
    ad::AdamConfig adam = config_.adam;
    adam.learning_rate = config_.learning_rate();
    adam_ = ad::AdamState::for_params(tensors_, adam);
    const std::size_t n = tensors_.size();
    const std::size_t nb = params_.backbone_tensors().size();
    const std::size_t n0 = params_.branch_tensors(0).size();
    primary_mask_ = make_mask(n, [&](std::size_t i) { return i < nb + n0; });
    aux_mask_ = make_mask(n, [&](std::size_t i) { return i < nb || i >= nb + n0; });
    all_mask_ = make_mask(n, [](std::size_t) { return true; });
}

void Trainer::check_finite(double loss, const char* phase) const {
    if (!std::isfinite(loss))
        throw TrainingDiverged(std::string("non-finite ") + phase + " loss at step " + std::to_string(step_), step_);
    if (!params_.all_finite())
        throw TrainingDiverged(std::string("non-finite parameters after ") + phase + " update at step " +
                                   std::to_string(step_),
                               step_);
}

void Trainer::primary_phase(std::span<const SampleRef> batch, StepReport& report) {
    if (batch.empty()) throw InvalidArgument("primary_phase: empty batch");
    const LossWeights w = config_.effective_weights();
    ad::Tape tape;
    std::vector<BaseLossItem> items;
    items.reserve(batch.size());
    for (const SampleRef& ref : batch) {
        if (const auto* full = std::get_if<const FullSample*>(&ref)) {
            const FullSample& s = **full;
            ad::Tensor f0 = forward_primary(tape, params_, ad::Tensor::constant(s.image));
            const double pred = std::accumulate(f0.data().begin(), f0.data().end(), 0.0);
            double mse = 0.0;
            for (std::size_t i = 0; i < s.density.size(); ++i)
                mse += (f0.data()[i] - s.density.values[i]) * (f0.data()[i] - s.density.values[i]);
            report.mse += mse;
            report.predicted.push_back(pred);
            report.labels.push_back(static_cast<double>(s.dots.count()));
            ++report.n_full;
            items.push_back({std::move(f0), s.density, std::nullopt});
        } else {
            const CountedImage& s = *std::get<const CountedImage*>(ref);
            if (config_.mode == TrainMode::Baseline1)
                throw InvalidArgument("train_step: baseline1 accepts only fully annotated samples");
            ad::Tensor f0 = forward_primary(tape, params_, ad::Tensor::constant(s.image));
            const double pred = std::accumulate(f0.data().begin(), f0.data().end(), 0.0);
            report.count += std::abs(pred - s.count);
            report.predicted.push_back(pred);
            report.labels.push_back(s.count);
            ++report.n_weak;
            items.push_back({std::move(f0), std::nullopt, s.count});
        }
    }
    const ad::Tensor loss = base_loss(tape, items, w);
    report.total += loss.item();
    check_finite(loss.item(), "primary");
    tape.backward(loss);
    ad::adam_step(tensors_, adam_, std::span<const bool>(primary_mask_.get(), tensors_.size()));
    check_finite(loss.item(), "primary");
}

void Trainer::aux_update(std::span<const AuxItem> items, StepReport& report) {
    const LossWeights w = config_.effective_weights();
    const bool symmetric = config_.mode == TrainMode::MattSymmetric;
    ad::Tape tape;
    ad::Tensor total;
    for (const AuxItem& s : items) {
        const ForwardOutput out = forward_all(tape, params_, ad::Tensor::constant(*s.image));
        const AuxTerms terms = aux_terms(out.aux, out.primary, params_.config.kernel_bank, s.count);
        report.aux_consistency += terms.consistency;
        report.aux_count += terms.count;
        ad::Tensor l = aux_loss(tape, out.aux, out.primary, params_.config.kernel_bank, s.count, w, symmetric);
        total = total.defined() ? tape.add(total, l) : l;
    }
    report.total += total.item();
    check_finite(total.item(), "auxiliary");
    tape.backward(total);
    const bool* mask = symmetric ? all_mask_.get() : aux_mask_.get();
    ad::adam_step(tensors_, adam_, std::span<const bool>(mask, tensors_.size()));
    check_finite(total.item(), "auxiliary");
}

void Trainer::aux_phase(std::span<const SampleRef> batch, StepReport& report) {
    if (!uses_aux_phase(config_.mode) || params_.num_aux() == 0) return;
    std::vector<AuxItem> items;
    for (const SampleRef& ref : batch) {
        if (const auto* w = std::get_if<const CountedImage*>(&ref)) {
            items.push_back({&(*w)->image, (*w)->count});
        } else if (config_.aux_on_full) {
            const FullSample& f = *std::get<const FullSample*>(ref);
            items.push_back({&f.image, static_cast<double>(f.dots.count())});
        }
    }
    if (!items.empty()) aux_update(items, report);
}

StepReport Trainer::train_step(std::span<const SampleRef> batch) {
    if (batch.empty()) throw InvalidArgument("train_step: empty batch");
    StepReport report;
    primary_phase(batch, report);
    aux_phase(batch, report);
    ++step_;
    return report;
}

TrainResult train(const DatasetSplits& splits, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (splits.full.empty()) throw InvalidArgument("train: A_F (fully annotated set) is empty");
    if (uses_aux_phase(config.mode) && !config.aux_on_full && splits.weak.empty())
        throw InvalidArgument("train: " + to_string(config.mode) + " needs weakly annotated samples");

    std::vector<SampleRef> pool;
    for (int r = 0; r < config.full_repeats; ++r)
        for (const auto& s : splits.full) pool.emplace_back(&s);
    if (config.mode != TrainMode::Baseline1)
        for (const auto& s : splits.weak) pool.emplace_back(&s);

    Trainer trainer(config, init_model(config.model, derive_seed(config.seed, "init")));
    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));

    TrainResult result;
    result.best_params = trainer.params().clone();
    result.best_val_mae = std::numeric_limits<double>::infinity();
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        trainer.set_learning_rate(config.learning_rate() * lr_multiplier(config.lr_schedule, epoch, config.epochs));
        std::shuffle(pool.begin(), pool.end(), shuffle_rng);
        HistoryRow row{epoch, "train"};
        std::vector<double> pred, labels;
        try {
            for (std::size_t i = 0; i < pool.size(); i += batch) {
                const auto n = std::min(batch, pool.size() - i);
                StepReport r = trainer.train_step(std::span<const SampleRef>(pool.data() + i, n));
                row.mse += r.mse;
                row.count += r.count;
                row.aux_consistency += r.aux_consistency;
                row.aux_count += r.aux_count;
                row.total += r.total;
                pred.insert(pred.end(), r.predicted.begin(), r.predicted.end());
                labels.insert(labels.end(), r.labels.begin(), r.labels.end());
            }
        } catch (const TrainingDiverged& e) {
            result.diverged = true;
            result.diverged_step = e.step();
            result.diverged_message = e.what();
            break;
        }
        row.mae = mae(pred, labels);
        result.history.push_back(row);
        if (on_epoch) on_epoch(row);

        if (!splits.val.empty()) {
            HistoryRow val{epoch, "val"};
            val.mae = evaluate_model(trainer.params(), splits.val).mae;
            result.history.push_back(val);
            if (on_epoch) on_epoch(val);
            if (val.mae < result.best_val_mae) {
                result.best_val_mae = val.mae;
                result.best_epoch = epoch;
                result.best_params = trainer.params().clone();
                result.best_step = trainer.steps_taken();
            }
        }
    }
    result.final_params = trainer.params().clone();
    result.steps = trainer.steps_taken();
    if (splits.val.empty() || result.best_epoch == 0) {
        result.best_params = result.final_params.clone();
        result.best_step = result.steps;
        result.best_epoch = static_cast<int>(std::count_if(result.history.begin(), result.history.end(),
                                                           [](const HistoryRow& r) { return r.split == "train"; }));
        if (splits.val.empty()) result.best_val_mae = 0.0;
    }
    return result;
}

} // namespace matt
