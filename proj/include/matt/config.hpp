#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "matt/density.hpp"
#include "matt/synthetic.hpp"
#include "matt/trainer.hpp"

namespace matt {

using Json = nlohmann::json;

/// Dataset generation and split sizes.
struct DataConfig {
    int base_count = 50;
    int levels = 10;
    int shots_per_level = 20;
    DeltaRange delta{1, 4};
    int test_extension = 30;
    double test_delta_factor = 2.0;
    int train_weak = 150;
    int val = 30;
    int test = 49;
    DensityOptions density;

    void validate() const;
};

/// Everything a command needs, in one JSON file.
struct RunConfig {
    std::uint64_t seed = 0; // top-level seed; data generation uses its "datagen" substream
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    SceneSpec scene;
    DataConfig data;
    TrainConfig train;
    std::string data_dir = "data";
    std::string output_dir = "runs";

    void validate() const;
    std::uint64_t generator_seed() const;
};

Json to_json(const SceneSpec& s);
Json to_json(const ModelConfig& m);
Json to_json(const LossWeights& w);
Json to_json(const ad::AdamConfig& a);
Json to_json(const TrainConfig& t);
Json to_json(const DataConfig& d);
Json to_json(const RunConfig& r);

// Parsers reject unknown keys and wrong types; missing keys keep defaults.
SceneSpec scene_from_json(const Json& j);
ModelConfig model_from_json(const Json& j);
LossWeights loss_weights_from_json(const Json& j);
ad::AdamConfig adam_from_json(const Json& j);
TrainConfig train_from_json(const Json& j);
DataConfig data_from_json(const Json& j);
RunConfig run_config_from_json(const Json& j);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& config);

} // namespace matt
