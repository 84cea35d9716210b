// Command-line entry point: gen-data, train, eval, compare, ablate, render.
//
// Exit codes: 0 success, 2 config/validation error (including missing
// inputs), 3 training divergence, 4 I/O error.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "matt/config.hpp"
#include "matt/experiments.hpp"
#include "matt/io.hpp"

namespace fs = std::filesystem;
using namespace matt;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDiverged = 3;
constexpr int kIoError = 4;

struct Options {
    std::string config_path;
    std::string mode;
    std::string seeds;
    std::string out;
    std::string sweep;
    std::string checkpoint;
    std::string split = "test";
    std::string image;
    std::string dots;
    std::string data_dir;
    int epochs = 0;
    bool timing = false;
    bool final_params = false;
};

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            if (!tok.empty() && tok[0] == '-') throw std::invalid_argument(tok);
            out.push_back(std::stoull(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InvalidArgument("--seeds: '" + tok + "' is not a non-negative integer");
        }
    }
    if (out.empty()) throw InvalidArgument("--seeds: expected a comma-separated list of integers");
    return out;
}

// Config file (or defaults) with command-line overrides applied.
RunConfig resolve_config(const Options& o) {
    RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
    if (!o.mode.empty()) c.train.mode = parse_mode(o.mode);
    if (!o.seeds.empty()) c.seeds = parse_seeds(o.seeds);
    if (o.epochs > 0) c.train.epochs = o.epochs;
    if (!o.data_dir.empty()) c.data_dir = o.data_dir;
    c.validate();
    return c;
}

DatasetSplits load_splits(const RunConfig& c) {
    const fs::path manifest = fs::path(c.data_dir) / "manifest.json";
    if (!fs::exists(manifest))
        throw MissingInput("no dataset manifest at '" + manifest.string() + "' (run gen-data first)");
    return make_splits(c, io::load_manifest(c.data_dir));
}

void log(const std::string& msg) { std::cerr << msg << '\n'; }

int cmd_gen_data(const Options& o) {
    RunConfig c = resolve_config(o);
    const fs::path dir = o.out.empty() ? fs::path(c.data_dir) : fs::path(o.out);
    const DatasetManifest m = generate_dataset(c);
    io::save_manifest(dir, m);
    log("wrote " + std::to_string(m.total()) + " images to " + dir.string());
    return kOk;
}

int cmd_train(const Options& o) {
    RunConfig c = resolve_config(o);
    const DatasetSplits splits = load_splits(c);
    const std::vector<std::uint64_t> seeds = o.seeds.empty() ? std::vector<std::uint64_t>{c.train.seed} : c.seeds;
    const fs::path root = o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out);
    int status = kOk;
    for (std::uint64_t seed : seeds) {
        RunConfig run = c;
        run.train.seed = seed;
        const fs::path dir = seeds.size() == 1 && !o.out.empty()
                                 ? root
                                 : root / (to_string(run.train.mode) + "-seed" + std::to_string(seed));
        fs::create_directories(dir / "checkpoints");
        save_run_config((dir / "config.json").string(), run);
        const TrainResult r = train(splits, run.train, [&](const HistoryRow& h) {
            log(to_string(run.train.mode) + " seed " + std::to_string(seed) + " epoch " + std::to_string(h.epoch) +
                " " + h.split + " mae " + format_number(h.mae));
        });
        io::write_text(dir / "history.csv", history_csv(r.history));
        if (r.diverged) {
            log("training diverged: " + r.diverged_message);
            status = kDiverged;
            continue;
        }
        io::save_checkpoint(dir / "checkpoints" / "final.ckpt", r.final_params, seed, r.steps);
        io::save_checkpoint(dir / "checkpoints" / "best.ckpt", r.best_params, seed, r.best_step);
        log("run directory: " + dir.string());
    }
    return status;
}

int cmd_eval(const Options& o) {
    if (o.checkpoint.empty()) throw InvalidArgument("eval: --checkpoint is required");
    RunConfig c = resolve_config(o);
    const io::Checkpoint ck = io::load_checkpoint(o.checkpoint);
    const DatasetSplits splits = load_splits(c);
    const std::vector<CountedImage>* set = nullptr;
    if (o.split == "test") set = &splits.test;
    else if (o.split == "val") set = &splits.val;
    else if (o.split == "weak") set = &splits.weak;
    else throw InvalidArgument("eval: --split must be test, val or weak");
    const MetricsReport m = evaluate_model(ck.params, *set);

    Json per_image = Json::array();
    for (const auto& [p, g] : m.per_image) per_image.push_back({{"predicted", p}, {"ground_truth", g}});
    const Json j{{"split", o.split}, {"n_images", m.n_images}, {"mae", m.mae},
                 {"mse", m.mse},     {"rer", m.rer},           {"per_image", per_image}};
    if (!o.out.empty()) {
        const fs::path dir(o.out);
        io::write_text(dir / "metrics.json", j.dump(2) + "\n");
        ResultRow row{"checkpoint", ck.seed, o.split, m.mae, m.mse, m.rer, m.n_images};
        io::write_text(dir / "metrics.csv", results_csv({row}));
    }
    std::cout << o.split << " n=" << m.n_images << " mae=" << format_number(m.mae)
              << " mse=" << format_number(m.mse) << " rer=" << format_number(100.0 * m.rer) << '\n';
    return kOk;
}

int write_rows(const fs::path& dir, const std::string& stem, const std::vector<ResultRow>& rows) {
    io::write_text(dir / (stem + ".csv"), results_csv(rows));
    const auto summary = summarize(rows);
    io::write_text(dir / (stem + "_summary.csv"), summary_csv(summary));
    std::cout << summary_csv(summary);
    for (const ResultRow& r : rows)
        if (r.diverged()) return kDiverged;
    return kOk;
}

RunOptions run_options(const Options& o) { return {o.timing, !o.final_params}; }

void log_row(const ResultRow& r) {
    log(r.method + " seed " + std::to_string(r.seed) + " " + r.split + " mae " + format_number(r.mae));
}

int cmd_compare(const Options& o) {
    RunConfig c = resolve_config(o);
    const DatasetSplits splits = load_splits(c);
    const fs::path dir = o.out.empty() ? fs::path(c.output_dir) / "compare" : fs::path(o.out);
    fs::create_directories(dir);
    save_run_config((dir / "config.json").string(), c);
    const auto rows = run_variants(splits, comparison_variants(c.train), c.seeds, run_options(o), log_row);
    return write_rows(dir, "results", rows);
}

int cmd_ablate(const Options& o) {
    if (o.sweep.empty()) throw InvalidArgument("ablate: --sweep is required");
    RunConfig c = resolve_config(o);
    const auto variants = sweep_variants(c.train, o.sweep);
    const DatasetSplits splits = load_splits(c);
    std::string stem = "sweep_" + o.sweep.substr(0, o.sweep.find('='));
    const fs::path dir = o.out.empty() ? fs::path(c.output_dir) / "ablate" : fs::path(o.out);
    fs::create_directories(dir);
    save_run_config((dir / "config.json").string(), c);
    const auto rows = run_variants(splits, variants, c.seeds, run_options(o), log_row);
    return write_rows(dir, stem, rows);
}

int cmd_render(const Options& o) {
    if (o.checkpoint.empty()) throw InvalidArgument("render: --checkpoint is required");
    if (o.image.empty()) throw InvalidArgument("render: --image is required");
    const io::Checkpoint ck = io::load_checkpoint(o.checkpoint);
    const DenseGrid image = io::read_pgm16(o.image);
    const fs::path dir = o.out.empty() ? fs::path("render") : fs::path(o.out);

    ad::Tape tape;
    const ForwardOutput out = forward_all(tape, ck.params, ad::Tensor::constant(image));
    io::write_density_pgm(dir / "prediction.pgm", out.primary.channel(0));
    std::cout << "prediction sum " << format_number(out.primary.channel(0).sum()) << '\n';
    if (!o.dots.empty()) {
        const DotMap dots = io::read_dotmap(o.dots);
        if (dots.width != image.cols || dots.height != image.rows)
            throw InvalidArgument("render: dot map size does not match the image");
        DensityOptions density;
        if (!o.config_path.empty()) density = load_run_config(o.config_path).data.density;
        io::write_density_pgm(dir / "ground_truth.pgm", render_density(dots, density));
        std::cout << "ground truth count " << dots.count() << '\n';
    }
    for (std::size_t k = 0; k < out.aux.size(); ++k)
        io::write_density_pgm(dir / ("aux_" + std::to_string(k + 1) + ".pgm"), out.aux[k].channel(0));
    return kOk;
}

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const MissingInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const TrainingDiverged& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const CapacityError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weakly supervised counting with multiple auxiliary tasks training"};
    app.require_subcommand(1);
    Options o;

    auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config_path, "run config JSON"); };
    auto add_data = [&](CLI::App* sub) { sub->add_option("--data", o.data_dir, "dataset directory (overrides data_dir)"); };
    auto add_train_flags = [&](CLI::App* sub) {
        sub->add_option("--mode", o.mode, "baseline1, baseline2, matt, matt-symmetric, matt-count-only, matt-mse-only");
        sub->add_option("--seeds", o.seeds, "comma-separated seeds");
        sub->add_option("--epochs", o.epochs, "override train.epochs");
    };

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic multi-shot dataset");
    add_config(gen);
    gen->add_option("--out", o.out, "output directory (default: data_dir)");

    auto* tr = app.add_subcommand("train", "train one model per seed");
    add_config(tr);
    add_data(tr);
    add_train_flags(tr);
    tr->add_option("--out", o.out, "run directory root (default: output_dir)");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    add_config(ev);
    add_data(ev);
    ev->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
    ev->add_option("--split", o.split, "test, val or weak");
    ev->add_option("--out", o.out, "directory for metrics.json and metrics.csv");

    auto* cmp = app.add_subcommand("compare", "baseline1 vs baseline2 vs matt over seeds");
    add_config(cmp);
    add_data(cmp);
    add_train_flags(cmp);
    cmp->add_option("--out", o.out, "output directory");
    cmp->add_flag("--timing", o.timing, "fill the runtime_seconds column");
    cmp->add_flag("--final", o.final_params, "evaluate final instead of best-validation parameters");

    auto* abl = app.add_subcommand("ablate", "ablation sweep over seeds");
    add_config(abl);
    add_data(abl);
    add_train_flags(abl);
    abl->add_option("--sweep", o.sweep, "branches=LO..HI, symmetry, lossterms or fully")->required();
    abl->add_option("--out", o.out, "output directory");
    abl->add_flag("--timing", o.timing, "fill the runtime_seconds column");
    abl->add_flag("--final", o.final_params, "evaluate final instead of best-validation parameters");

    auto* rd = app.add_subcommand("render", "write predicted, ground-truth and auxiliary density maps");
    add_config(rd);
    rd->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
    rd->add_option("--image", o.image, "16-bit PGM image")->required();
    rd->add_option("--dots", o.dots, "dot map JSON for the ground-truth map");
    rd->add_option("--out", o.out, "output directory (default: render)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (gen->parsed()) return guarded([&] { return cmd_gen_data(o); });
    if (tr->parsed()) return guarded([&] { return cmd_train(o); });
    if (ev->parsed()) return guarded([&] { return cmd_eval(o); });
    if (cmp->parsed()) return guarded([&] { return cmd_compare(o); });
    if (abl->parsed()) return guarded([&] { return cmd_ablate(o); });
    if (rd->parsed()) return guarded([&] { return cmd_render(o); });
    return kConfigError;
}
