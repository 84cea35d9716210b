#pragma once

// Multi-seed method comparisons and ablation sweeps, reported as CSV rows.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "matt/config.hpp"
#include "matt/evaluation.hpp"
#include "matt/trainer.hpp"

namespace matt {

/// Seed shot, re-shoots and wide-range test shots for `config`.
DatasetManifest generate_dataset(const RunConfig& config);
/// A_F, A_W, val and test with the configured sizes and density options.
DatasetSplits make_splits(const RunConfig& config, const DatasetManifest& manifest);

/// One CSV row: method, seed, split, mae, mse, rer, n_images, runtime_seconds.
/// A diverged run keeps its row with split "diverged" and no metrics.
struct ResultRow {
    std::string method;
    std::uint64_t seed = 0;
    std::string split = "test";
    double mae = 0.0;
    double mse = 0.0;
    double rer = 0.0;
    int n_images = 0;
    double runtime_seconds = -1.0; // negative: not recorded
    bool diverged() const { return split == "diverged"; }
};

/// A labelled training configuration inside a comparison or sweep.
struct Variant {
    std::string label;
    TrainConfig config;
    bool full_only = false; // train on A_F alone (weak samples dropped)
};

struct RunOptions {
    /// Record wall-clock runtime. Off by default so outputs stay byte-identical.
    bool timing = false;
    /// Evaluate the lowest-validation-MAE snapshot (true) or the last one.
    bool use_best = true;
};

/// Trains `variant` with `seed` and evaluates on the test split.
ResultRow run_variant(const DatasetSplits& splits, const Variant& variant, std::uint64_t seed,
                      const RunOptions& opt = {});

/// Rows ordered by variant, then seed. `on_row` sees each row as it finishes.
std::vector<ResultRow> run_variants(const DatasetSplits& splits, const std::vector<Variant>& variants,
                                    const std::vector<std::uint64_t>& seeds, const RunOptions& opt = {},
                                    const std::function<void(const ResultRow&)>& on_row = {});

/// baseline1, baseline2, matt built from `base`.
std::vector<Variant> comparison_variants(const TrainConfig& base);

/// Sweep names: "branches=LO..HI" (or "branches=K"), "symmetry", "lossterms",
/// "fully". The bare name "branches" means 0..8.
std::vector<Variant> sweep_variants(const TrainConfig& base, const std::string& sweep);

struct SummaryRow {
    std::string method;
    int runs = 0;     // runs that finished
    int diverged = 0; // runs that did not
    double mae_mean = 0.0, mae_std = 0.0;
    double mse_mean = 0.0, mse_std = 0.0;
    double rer_mean = 0.0, rer_std = 0.0;
};

/// Per-method mean and sample standard deviation over finished runs, in
/// order of first appearance.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

std::string results_csv(const std::vector<ResultRow>& rows);
/// RER is shown x100 here.
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// epoch, split, mse, count, aux_consistency, aux_count, total, mae
std::string history_csv(const std::vector<HistoryRow>& rows);

/// Fixed-precision decimal used by every CSV writer.
std::string format_number(double v);

} // namespace matt
