#pragma once

// On-disk formats: 16-bit binary PGM images, DotMap JSON, model checkpoints
// and the dataset manifest directory.

#include <filesystem>
#include <string>

#include "matt/config.hpp"
#include "matt/density.hpp"
#include "matt/model.hpp"
#include "matt/synthetic.hpp"

namespace matt::io {

namespace fs = std::filesystem;

/// P5, maxval 65535, big-endian samples. Values are clamped to [0,1] and
/// stored as round(v * 65535).
void write_pgm16(const fs::path& path, const DenseGrid& image);
/// Returns samples / maxval.
DenseGrid read_pgm16(const fs::path& path);

/// Density maps are stored normalized to their maximum; the sidecar
/// `<path>.json` holds {"scale": max, "sum": integral} so values can be
/// recovered as sample / 65535 * scale.
void write_density_pgm(const fs::path& path, const DensityGrid& density);
DensityGrid read_density_pgm(const fs::path& path);

/// {"width": W, "height": H, "points": [[x, y], ...]}
Json dotmap_to_json(const DotMap& dots);
DotMap dotmap_from_json(const Json& j);
void write_dotmap(const fs::path& path, const DotMap& dots);
DotMap read_dotmap(const fs::path& path);

struct Checkpoint {
    ModelParams params;
    std::uint64_t seed = 0;
    long long step = 0;
};

/// One line of compact JSON (format tag, model config, seed, step, tensor
/// shapes), then every parameter as little-endian float64 in
/// ModelParams::tensors() order.
void save_checkpoint(const fs::path& path, const ModelParams& params, std::uint64_t seed = 0, long long step = 0);
Checkpoint load_checkpoint(const fs::path& path);

/// Writes dir/manifest.json, dir/images/<id>.pgm, dir/dots/<seed id>.json
/// and, for every count-labelled sample, dir/hidden/<id>.json.
void save_manifest(const fs::path& dir, const DatasetManifest& manifest);
DatasetManifest load_manifest(const fs::path& dir);

/// Plain text helpers; failures throw IoError (MissingInput when absent).
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

} // namespace matt::io
