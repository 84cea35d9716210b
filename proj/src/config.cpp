#include "matt/config.hpp"

#include <fstream>
#include <set>

#include "matt/rng.hpp"

namespace matt {

namespace {

// Reads one JSON object section; rejects unknown keys on finish().
class Section {
public:
    Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw InvalidArgument(name_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw InvalidArgument(field(key) + ": wrong type");
        }
    }

    void range(const char* key, Range& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
            throw InvalidArgument(field(key) + ": expected [min, max]");
        out = {(*it)[0].get<double>(), (*it)[1].get<double>()};
    }

    const Json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string field(const char* key) const { return name_ + "." + key; }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.contains(k)) throw InvalidArgument(name_ + ": unknown key '" + k + "'");
    }

private:
    const Json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

Json range_json(const Range& r) { return Json::array({r.min, r.max}); }

std::string activation_name(OutputActivation a) { return a == OutputActivation::Relu ? "relu" : "softplus"; }

} // namespace

void DataConfig::validate() const {
    if (base_count < 1) throw InvalidArgument("data.base_count must be >= 1");
    if (levels < 1) throw InvalidArgument("data.levels must be >= 1");
    if (shots_per_level < 1) throw InvalidArgument("data.shots_per_level must be >= 1");
    if (delta.min < 0 || delta.max < delta.min) throw InvalidArgument("data.delta_range must satisfy 0 <= min <= max");
    if (base_count <= levels * delta.max)
        throw InvalidArgument("data.base_count must exceed levels * delta_range max");
    if (test_extension < 0) throw InvalidArgument("data.test_extension must be >= 0");
    if (!(test_delta_factor >= 1.0)) throw InvalidArgument("data.test_delta_factor must be >= 1");
    if (train_weak < 0 || val < 0 || test < 0) throw InvalidArgument("data split sizes must be >= 0");
    const int available = levels * shots_per_level - 1 + test_extension;
    if (train_weak + val + test != available)
        throw InvalidArgument("data.train_weak + data.val + data.test must equal " + std::to_string(available) +
                              " (generated non-seed images)");
    if (!(density.sigma > 0.0)) throw InvalidArgument("data.density_sigma must be > 0");
    if (!(density.truncation_radius >= 2.0)) throw InvalidArgument("data.density_truncation must be >= 2");
}

void RunConfig::validate() const {
    scene.validate();
    data.validate();
    train.validate();
    if (seeds.empty()) throw InvalidArgument("seeds must not be empty");
    if (data_dir.empty()) throw InvalidArgument("data_dir must not be empty");
    if (output_dir.empty()) throw InvalidArgument("output_dir must not be empty");
}

std::uint64_t RunConfig::generator_seed() const { return derive_seed(seed, "datagen"); }

// ------------------------------------------------------------------ to_json

Json to_json(const SceneSpec& s) {
    return {{"width", s.width},
            {"height", s.height},
            {"object_radius_range", range_json(s.object_radius_range)},
            {"intensity_range", range_json(s.intensity_range)},
            {"background_noise_std", s.background_noise_std},
            {"min_center_distance", s.min_center_distance},
            {"category_id", s.category_id},
            {"background_range", range_json(s.background_range)},
            {"view_scale_range", range_json(s.view_scale_range)}};
}

Json to_json(const ModelConfig& m) {
    Json bank = Json::array();
    for (const auto& k : m.kernel_bank) bank.push_back({{"rows", k.rows}, {"cols", k.cols}, {"sigma", k.sigma}});
    return {{"in_channels", m.in_channels},
            {"backbone_channels", m.backbone_channels},
            {"backbone_dilations", m.backbone_dilations},
            {"branch_channels", m.branch_channels},
            {"num_aux_branches", m.num_aux_branches},
            {"kernel_bank", bank},
            {"output_activation", activation_name(m.output_activation)},
            {"output_scale", m.output_scale},
            {"output_bias_init", m.output_bias_init},
            {"input_shift", m.input_shift},
            {"input_scale", m.input_scale}};
}

Json to_json(const LossWeights& w) { return {{"alpha", w.alpha}, {"beta1", w.beta1}, {"beta2", w.beta2}}; }

Json to_json(const ad::AdamConfig& a) {
    return {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

Json to_json(const TrainConfig& t) {
    return {{"mode", to_string(t.mode)},       {"epochs", t.epochs},
            {"batch_size", t.batch_size},      {"seed", t.seed},
            {"loss_weights", to_json(t.loss_weights)}, {"adam", to_json(t.adam)},
            {"mode_learning_rates", t.mode_learning_rates},
            {"model", to_json(t.model)},       {"full_repeats", t.full_repeats},
            {"aux_on_full", t.aux_on_full},    {"lr_schedule", to_string(t.lr_schedule)}};
}

Json to_json(const DataConfig& d) {
    return {{"base_count", d.base_count},
            {"levels", d.levels},
            {"shots_per_level", d.shots_per_level},
            {"delta_range", Json::array({d.delta.min, d.delta.max})},
            {"test_extension", d.test_extension},
            {"test_delta_factor", d.test_delta_factor},
            {"train_weak", d.train_weak},
            {"val", d.val},
            {"test", d.test},
            {"density_sigma", d.density.sigma},
            {"density_truncation", d.density.truncation_radius}};
}

Json to_json(const RunConfig& r) {
    return {{"seed", r.seed},
            {"seeds", r.seeds},
            {"scene", to_json(r.scene)},
            {"data", to_json(r.data)},
            {"train", to_json(r.train)},
            {"data_dir", r.data_dir},
            {"output_dir", r.output_dir}};
}

// ---------------------------------------------------------------- from_json

SceneSpec scene_from_json(const Json& j) {
    SceneSpec s;
    Section sec(j, "scene");
    sec.get("width", s.width);
    sec.get("height", s.height);
    sec.range("object_radius_range", s.object_radius_range);
    sec.range("intensity_range", s.intensity_range);
    sec.get("background_noise_std", s.background_noise_std);
    sec.get("min_center_distance", s.min_center_distance);
    sec.get("category_id", s.category_id);
    sec.range("background_range", s.background_range);
    sec.range("view_scale_range", s.view_scale_range);
    sec.finish();
    return s;
}

ModelConfig model_from_json(const Json& j) {
    ModelConfig m;
    Section sec(j, "model");
    sec.get("in_channels", m.in_channels);
    sec.get("backbone_channels", m.backbone_channels);
    sec.get("backbone_dilations", m.backbone_dilations);
    sec.get("branch_channels", m.branch_channels);
    sec.get("num_aux_branches", m.num_aux_branches);
    if (const Json* bank = sec.child("kernel_bank")) {
        if (!bank->is_array()) throw InvalidArgument("model.kernel_bank: expected an array");
        m.kernel_bank.clear();
        for (const Json& k : *bank) {
            int rows = 0, cols = 0;
            double sigma = 1.0;
            Section ks(k, "model.kernel_bank[]");
            ks.get("rows", rows);
            ks.get("cols", cols);
            ks.get("sigma", sigma);
            ks.finish();
            m.kernel_bank.push_back(make_aux_kernel(rows, cols, sigma));
        }
    } else {
        m.kernel_bank = kernel_bank(m.num_aux_branches);
    }
    if (const Json* act = sec.child("output_activation")) {
        if (*act == "relu") m.output_activation = OutputActivation::Relu;
        else if (*act == "softplus") m.output_activation = OutputActivation::Softplus;
        else throw InvalidArgument("model.output_activation: expected \"relu\" or \"softplus\"");
    }
    sec.get("output_scale", m.output_scale);
    sec.get("output_bias_init", m.output_bias_init);
    sec.get("input_shift", m.input_shift);
    sec.get("input_scale", m.input_scale);
    sec.finish();
    return m;
}

LossWeights loss_weights_from_json(const Json& j) {
    LossWeights w;
    Section sec(j, "loss_weights");
    sec.get("alpha", w.alpha);
    sec.get("beta1", w.beta1);
    sec.get("beta2", w.beta2);
    sec.finish();
    return w;
}

ad::AdamConfig adam_from_json(const Json& j) {
    ad::AdamConfig a;
    Section sec(j, "adam");
    sec.get("learning_rate", a.learning_rate);
    sec.get("beta1", a.beta1);
    sec.get("beta2", a.beta2);
    sec.get("epsilon", a.epsilon);
    sec.finish();
    return a;
}

TrainConfig train_from_json(const Json& j) {
    TrainConfig t;
    Section sec(j, "train");
    std::string mode = to_string(t.mode);
    sec.get("mode", mode);
    t.mode = parse_mode(mode);
    sec.get("epochs", t.epochs);
    sec.get("batch_size", t.batch_size);
    sec.get("seed", t.seed);
    if (const Json* w = sec.child("loss_weights")) t.loss_weights = loss_weights_from_json(*w);
    if (const Json* a = sec.child("adam")) t.adam = adam_from_json(*a);
    if (const Json* m = sec.child("model")) t.model = model_from_json(*m);
    sec.get("mode_learning_rates", t.mode_learning_rates);
    sec.get("full_repeats", t.full_repeats);
    sec.get("aux_on_full", t.aux_on_full);
    std::string schedule = to_string(t.lr_schedule);
    sec.get("lr_schedule", schedule);
    t.lr_schedule = parse_lr_schedule(schedule);
    sec.finish();
    return t;
}

DataConfig data_from_json(const Json& j) {
    DataConfig d;
    Section sec(j, "data");
    sec.get("base_count", d.base_count);
    sec.get("levels", d.levels);
    sec.get("shots_per_level", d.shots_per_level);
    if (const Json* r = sec.child("delta_range")) {
        if (!r->is_array() || r->size() != 2 || !(*r)[0].is_number_integer() || !(*r)[1].is_number_integer())
            throw InvalidArgument("data.delta_range: expected [min, max] integers");
        d.delta = {(*r)[0].get<int>(), (*r)[1].get<int>()};
    }
    sec.get("test_extension", d.test_extension);
    sec.get("test_delta_factor", d.test_delta_factor);
    sec.get("train_weak", d.train_weak);
    sec.get("val", d.val);
    sec.get("test", d.test);
    sec.get("density_sigma", d.density.sigma);
    sec.get("density_truncation", d.density.truncation_radius);
    sec.finish();
    return d;
}

RunConfig run_config_from_json(const Json& j) {
    RunConfig r;
    Section sec(j, "config");
    sec.get("seed", r.seed);
    sec.get("seeds", r.seeds);
    if (const Json* s = sec.child("scene")) r.scene = scene_from_json(*s);
    if (const Json* d = sec.child("data")) r.data = data_from_json(*d);
    if (const Json* t = sec.child("train")) r.train = train_from_json(*t);
    sec.get("data_dir", r.data_dir);
    sec.get("output_dir", r.output_dir);
    sec.finish();
    return r;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open config file '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& config) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << to_json(config).dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

} // namespace matt
