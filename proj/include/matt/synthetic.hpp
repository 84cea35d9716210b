#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matt/density.hpp"
#include "matt/grid.hpp"

namespace matt {

struct Range {
    double min = 0.0;
    double max = 0.0;
    friend bool operator==(const Range&, const Range&) = default;
};

enum class BlobShape { Disk = 0, Ring = 1, Ellipse = 2 };

/// Procedural scene description. category_id selects the blob family
/// (id % 3: disk, ring, ellipse).
struct SceneSpec {
    int width = 64;
    int height = 64;
    Range object_radius_range{1.6, 2.6};
    Range intensity_range{0.45, 0.95};
    double background_noise_std = 0.04;
    double min_center_distance = 2.5;
    int category_id = 0;
    /// Background level drawn once per shot (the re-shoot changes the backdrop).
    Range background_range{0.05, 0.35};
    /// Radius multiplier drawn once per shot (viewpoint distance).
    Range view_scale_range{0.85, 1.2};

    void validate() const;
    BlobShape shape() const { return static_cast<BlobShape>(category_id % 3); }
    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct Scene {
    DenseGrid image; // values in [0,1], quantized to 1/65535
    DotMap dots;
};

/// Rejection-samples n_objects centers at least min_center_distance apart,
/// renders soft-edged blobs over a noisy background.
Scene generate_scene(const SceneSpec& spec, int n_objects, std::uint64_t rng_seed);

struct ManifestEntry {
    std::string id;
    int level = 0;      // quantity level; -1 for wide-range test shots
    double count = 0.0; // propagated label
    DenseGrid image;
    DotMap dots;        // visible for the seed image, hidden otherwise
};

struct DatasetManifest {
    ManifestEntry seed_sample;
    std::vector<ManifestEntry> weak_samples;
    std::vector<ManifestEntry> val_samples;
    std::vector<ManifestEntry> test_samples;
    std::uint64_t generator_seed = 0;
    SceneSpec scene_spec;

    std::size_t total() const {
        return 1 + weak_samples.size() + val_samples.size() + test_samples.size();
    }
};

struct DeltaRange {
    int min = 1;
    int max = 5;
};

/// Seed shot at level 0 plus re-shoots; each new level adds or removes a
/// sampled number of objects. Labels are propagated from the seed count.
/// Produces levels * shots_per_level images (the seed is one of them).
DatasetManifest multishot_sequence(const SceneSpec& spec, int base_count, int levels, int shots_per_level,
                                   DeltaRange delta_range, std::uint64_t rng_seed);

/// Appends `n_images` test shots whose counts sweep past both ends of the
/// training range, stepping by `delta_factor` times the training deltas.
void extend_test_range(DatasetManifest& manifest, int n_images, DeltaRange delta_range,
                       double delta_factor);

struct CountedImage {
    DenseGrid image;
    double count = 0.0;
};

struct FullSample {
    DenseGrid image;
    DotMap dots;
    DensityGrid density;
};

/// A_F, A_W, validation and test splits.
struct DatasetSplits {
    std::vector<FullSample> full;
    std::vector<CountedImage> weak;
    std::vector<CountedImage> val;
    std::vector<CountedImage> test;
    /// Hidden dot maps of the test images (diagnostics only).
    std::vector<DotMap> test_hidden;
};

/// A_F is the seed image. The re-shoots are shuffled deterministically and
/// dealt into train_weak, then val; whatever remains joins the wide-range
/// test shots. train_weak + val + test must equal the number of non-seed
/// images in the manifest.
DatasetSplits split_dataset(const DatasetManifest& manifest, int train_weak, int val, int test,
                            const DensityOptions& density = {});

} // namespace matt
