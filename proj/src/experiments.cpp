#include "matt/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace matt {

DatasetManifest generate_dataset(const RunConfig& config) {
    config.scene.validate();
    config.data.validate();
    const DataConfig& d = config.data;
    DatasetManifest m = multishot_sequence(config.scene, d.base_count, d.levels, d.shots_per_level, d.delta,
                                           config.generator_seed());
    extend_test_range(m, d.test_extension, d.delta, d.test_delta_factor);
    return m;
}

DatasetSplits make_splits(const RunConfig& config, const DatasetManifest& manifest) {
    const DataConfig& d = config.data;
    return split_dataset(manifest, d.train_weak, d.val, d.test, d.density);
}

ResultRow run_variant(const DatasetSplits& splits, const Variant& variant, std::uint64_t seed,
                      const RunOptions& opt) {
    if (splits.test.empty()) throw InvalidArgument("run_variant: test split is empty");
    TrainConfig config = variant.config;
    config.seed = seed;

    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    if (variant.full_only) {
        DatasetSplits full_only{splits.full, {}, splits.val, {}, {}};
        result = train(full_only, config);
    } else {
        result = train(splits, config);
    }

    ResultRow row;
    row.method = variant.label;
    row.seed = seed;
    if (result.diverged) {
        row.split = "diverged";
    } else {
        const MetricsReport m = evaluate_model(opt.use_best ? result.best_params : result.final_params, splits.test);
        row.mae = m.mae;
        row.mse = m.mse;
        row.rer = m.rer;
        row.n_images = m.n_images;
    }
    if (opt.timing)
        row.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

std::vector<ResultRow> run_variants(const DatasetSplits& splits, const std::vector<Variant>& variants,
                                    const std::vector<std::uint64_t>& seeds, const RunOptions& opt,
                                    const std::function<void(const ResultRow&)>& on_row) {
    if (seeds.empty()) throw InvalidArgument("at least one seed is required");
    std::vector<ResultRow> rows;
    for (const Variant& v : variants)
        for (std::uint64_t s : seeds) {
            rows.push_back(run_variant(splits, v, s, opt));
            if (on_row) on_row(rows.back());
        }
    return rows;
}

std::vector<Variant> comparison_variants(const TrainConfig& base) {
    std::vector<Variant> out;
    for (TrainMode m : {TrainMode::Baseline1, TrainMode::Baseline2, TrainMode::Matt}) {
        Variant v{to_string(m), base};
        v.config.mode = m;
        out.push_back(std::move(v));
    }
    return out;
}

namespace {

int parse_int(const std::string& s, const std::string& sweep) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("bad sweep range in '" + sweep + "' (expected branches=LO..HI)");
}

Variant with_mode(const TrainConfig& base, std::string label, TrainMode mode) {
    Variant v{std::move(label), base};
    v.config.mode = mode;
    return v;
}

} // namespace

std::vector<Variant> sweep_variants(const TrainConfig& base, const std::string& sweep) {
    std::vector<Variant> out;
    if (sweep == "branches" || sweep.starts_with("branches=")) {
        int lo = 0, hi = 8;
        if (sweep != "branches") {
            const std::string range = sweep.substr(9);
            const auto dots = range.find("..");
            if (dots == std::string::npos) {
                lo = hi = parse_int(range, sweep);
            } else {
                lo = parse_int(range.substr(0, dots), sweep);
                hi = parse_int(range.substr(dots + 2), sweep);
            }
        }
        if (lo < 0 || hi < lo) throw InvalidArgument("sweep '" + sweep + "': need 0 <= LO <= HI");
        for (int k = lo; k <= hi; ++k) {
            Variant v = with_mode(base, "K=" + std::to_string(k), TrainMode::Matt);
            v.config.model.num_aux_branches = k;
            v.config.model.kernel_bank = kernel_bank(k);
            out.push_back(std::move(v));
        }
    } else if (sweep == "symmetry") {
        out.push_back(with_mode(base, "asymmetric", TrainMode::Matt));
        out.push_back(with_mode(base, "symmetric", TrainMode::MattSymmetric));
    } else if (sweep == "lossterms") {
        out.push_back(with_mode(base, "count-only", TrainMode::MattCountOnly));
        out.push_back(with_mode(base, "mse-only", TrainMode::MattMseOnly));
        out.push_back(with_mode(base, "both", TrainMode::Matt));
    } else if (sweep == "fully") {
        out.push_back(with_mode(base, "baseline1", TrainMode::Baseline1));
        Variant v = with_mode(base, "matt-on-fully", TrainMode::Matt);
        v.config.aux_on_full = true;
        v.full_only = true;
        out.push_back(std::move(v));
    } else {
        throw InvalidArgument("unknown sweep '" + sweep + "' (expected branches=LO..HI, symmetry, lossterms, fully)");
    }
    return out;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    std::vector<SummaryRow> out;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<const ResultRow*>> groups;
    for (const ResultRow& r : rows) {
        auto [it, inserted] = index.try_emplace(r.method, out.size());
        if (inserted) {
            out.push_back({r.method});
            groups.emplace_back();
        }
        if (r.diverged()) ++out[it->second].diverged;
        else groups[it->second].push_back(&r);
    }
    auto stats = [](const std::vector<const ResultRow*>& g, double ResultRow::*f, double& mean, double& sd) {
        mean = sd = 0.0;
        if (g.empty()) return;
        for (const ResultRow* r : g) mean += r->*f;
        mean /= static_cast<double>(g.size());
        if (g.size() < 2) return;
        for (const ResultRow* r : g) sd += (r->*f - mean) * (r->*f - mean);
        sd = std::sqrt(sd / static_cast<double>(g.size() - 1));
    };
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].runs = static_cast<int>(groups[i].size());
        stats(groups[i], &ResultRow::mae, out[i].mae_mean, out[i].mae_std);
        stats(groups[i], &ResultRow::mse, out[i].mse_mean, out[i].mse_std);
        stats(groups[i], &ResultRow::rer, out[i].rer_mean, out[i].rer_std);
    }
    return out;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << "method,seed,split,mae,mse,rer,n_images,runtime_seconds\n";
    for (const ResultRow& r : rows) {
        out << r.method << ',' << r.seed << ',' << r.split << ',';
        if (r.diverged()) out << ",,,";
        else out << format_number(r.mae) << ',' << format_number(r.mse) << ',' << format_number(r.rer) << ',';
        out << r.n_images << ',';
        if (r.runtime_seconds >= 0.0) out << format_number(r.runtime_seconds);
        out << '\n';
    }
    return out.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << "method,runs,diverged,mae_mean,mae_std,mse_mean,mse_std,rer_x100_mean,rer_x100_std\n";
    for (const SummaryRow& s : rows)
        out << s.method << ',' << s.runs << ',' << s.diverged << ',' << format_number(s.mae_mean) << ','
            << format_number(s.mae_std) << ',' << format_number(s.mse_mean) << ',' << format_number(s.mse_std) << ','
            << format_number(100.0 * s.rer_mean) << ',' << format_number(100.0 * s.rer_std) << '\n';
    return out.str();
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
    std::ostringstream out;
    out << "epoch,split,mse,count,aux_consistency,aux_count,total,mae\n";
    for (const HistoryRow& r : rows)
        out << r.epoch << ',' << r.split << ',' << format_number(r.mse) << ',' << format_number(r.count) << ','
            << format_number(r.aux_consistency) << ',' << format_number(r.aux_count) << ','
            << format_number(r.total) << ',' << format_number(r.mae) << '\n';
    return out.str();
}

} // namespace matt
