#include "matt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "matt/rng.hpp"

namespace matt {

namespace {

constexpr int kMaxPlacementAttempts = 2000;
constexpr double kQuantum = 65535.0;

void check_range(const Range& r, const char* name) {
    if (!(std::isfinite(r.min) && std::isfinite(r.max)) || !(r.min < r.max))
        throw InvalidArgument(std::string("scene.") + name + ": min must be < max");
}

double uniform(Rng& rng, const Range& r) { return std::uniform_real_distribution<double>(r.min, r.max)(rng); }

struct Blob {
    double x, y, radius, intensity, angle;
};

// Soft step: 1 inside, 0 outside, ~0.6 px transition.
double soft_edge(double d, double radius) { return 1.0 / (1.0 + std::exp((d - radius) / 0.3)); }

double blob_profile(BlobShape shape, const Blob& b, double px, double py) {
    const double dx = px - b.x, dy = py - b.y;
    switch (shape) {
    case BlobShape::Disk:
        return soft_edge(std::hypot(dx, dy), b.radius);
    case BlobShape::Ring: {
        const double d = std::hypot(dx, dy);
        const double width = 0.35 * b.radius + 0.3;
        const double t = (d - 0.7 * b.radius) / width;
        return std::exp(-0.5 * t * t);
    }
    case BlobShape::Ellipse: {
        const double c = std::cos(b.angle), s = std::sin(b.angle);
        const double u = c * dx + s * dy, v = -s * dx + c * dy;
        const double minor = 0.6;
        const double d = std::sqrt(u * u + (v / minor) * (v / minor));
        return soft_edge(d, b.radius);
    }
    }
    return 0.0;
}

} // namespace

void SceneSpec::validate() const {
    if (width < 8 || height < 8) throw InvalidArgument("scene.width/height must be >= 8");
    check_range(object_radius_range, "object_radius_range");
    check_range(intensity_range, "intensity_range");
    check_range(background_range, "background_range");
    check_range(view_scale_range, "view_scale_range");
    if (object_radius_range.min <= 0.0) throw InvalidArgument("scene.object_radius_range: min must be > 0");
    if (intensity_range.min < 0.0 || intensity_range.max > 1.0)
        throw InvalidArgument("scene.intensity_range must lie in [0,1]");
    if (background_range.min < 0.0 || background_range.max > 1.0)
        throw InvalidArgument("scene.background_range must lie in [0,1]");
    if (view_scale_range.min <= 0.0) throw InvalidArgument("scene.view_scale_range: min must be > 0");
    if (!(background_noise_std >= 0.0)) throw InvalidArgument("scene.background_noise_std must be >= 0");
    if (!(min_center_distance >= 0.0)) throw InvalidArgument("scene.min_center_distance must be >= 0");
    if (category_id < 0) throw InvalidArgument("scene.category_id must be >= 0");
}

Scene generate_scene(const SceneSpec& spec, int n_objects, std::uint64_t rng_seed) {
    spec.validate();
    if (n_objects < 0) throw InvalidArgument("generate_scene: n_objects must be >= 0");
    Rng rng(rng_seed);

    const double background = uniform(rng, spec.background_range);
    const double view_scale = uniform(rng, spec.view_scale_range);

    // Centers stay one pixel inside the border so every dot is in bounds.
    const Range xs{1.0, spec.width - 1.0}, ys{1.0, spec.height - 1.0};
    const double min_d2 = spec.min_center_distance * spec.min_center_distance;
    std::vector<Blob> blobs;
    blobs.reserve(n_objects);
    for (int i = 0; i < n_objects; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
            const double x = uniform(rng, xs), y = uniform(rng, ys);
            placed = std::none_of(blobs.begin(), blobs.end(), [&](const Blob& b) {
                return (b.x - x) * (b.x - x) + (b.y - y) * (b.y - y) < min_d2;
            });
            if (placed) blobs.push_back({x, y, 0.0, 0.0, 0.0});
        }
        if (!placed)
            throw CapacityError("generate_scene: could not place " + std::to_string(n_objects) +
                                    " objects (failed at object " + std::to_string(i + 1) + ")",
                                static_cast<std::size_t>(n_objects));
    }
    for (Blob& b : blobs) {
        b.radius = uniform(rng, spec.object_radius_range) * view_scale;
        b.intensity = uniform(rng, spec.intensity_range);
        b.angle = uniform(rng, Range{0.0, std::numbers::pi});
    }

    Scene scene;
    scene.image = DenseGrid(spec.height, spec.width, 0.0);
    scene.dots = DotMap{spec.width, spec.height, {}};
    for (const Blob& b : blobs) scene.dots.points.push_back({b.x, b.y});

    std::normal_distribution<double> noise(0.0, spec.background_noise_std > 0 ? spec.background_noise_std : 1.0);
    const BlobShape shape = spec.shape();
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            const double px = c + 0.5, py = r + 0.5;
            double object = 0.0;
            for (const Blob& b : blobs) {
                if (std::abs(px - b.x) > 2.0 * b.radius + 2.0 || std::abs(py - b.y) > 2.0 * b.radius + 2.0)
                    continue;
                object = std::max(object, b.intensity * blob_profile(shape, b, px, py));
            }
            double v = background + object * (1.0 - background);
            if (spec.background_noise_std > 0) v += noise(rng);
            v = std::clamp(v, 0.0, 1.0);
            scene.image.at(r, c) = std::round(v * kQuantum) / kQuantum;
        }
    }
    return scene;
}

DatasetManifest multishot_sequence(const SceneSpec& spec, int base_count, int levels, int shots_per_level,
                                   DeltaRange delta_range, std::uint64_t rng_seed) {
    spec.validate();
    if (levels < 1 || shots_per_level < 1)
        throw InvalidArgument("multishot_sequence: levels and shots_per_level must be >= 1");
    if (delta_range.min < 0 || delta_range.max < delta_range.min)
        throw InvalidArgument("multishot_sequence: delta range must satisfy 0 <= min <= max");
    if (base_count <= static_cast<long long>(levels) * delta_range.max)
        throw InvalidArgument("multishot_sequence: base_count " + std::to_string(base_count) +
                              " must exceed levels * max delta (" +
                              std::to_string(levels * delta_range.max) + ") or counts can go non-positive");

    DatasetManifest m;
    m.generator_seed = rng_seed;
    m.scene_spec = spec;
    Rng walk(derive_seed(rng_seed, "levels"));
    std::uniform_int_distribution<int> delta(delta_range.min, delta_range.max);
    std::bernoulli_distribution add(0.5);

    int count = base_count;
    std::uint64_t shot_index = 0;
    for (int level = 0; level < levels; ++level) {
        if (level > 0) {
            const int d = delta(walk);
            count += add(walk) ? d : -d;
            if (count <= 0) throw InvalidArgument("multishot_sequence: count went non-positive");
        }
        for (int shot = 0; shot < shots_per_level; ++shot, ++shot_index) {
            Scene scene = generate_scene(spec, count, derive_seed(rng_seed, "shot", shot_index));
            ManifestEntry e;
            e.id = "L" + std::to_string(level) + "_S" + std::to_string(shot);
            e.level = level;
            e.count = count; // propagated, not re-measured
            e.image = std::move(scene.image);
            e.dots = std::move(scene.dots);
            if (level == 0 && shot == 0) {
                e.id = "seed";
                m.seed_sample = std::move(e);
            } else {
                m.weak_samples.push_back(std::move(e));
            }
        }
    }
    return m;
}

void extend_test_range(DatasetManifest& m, int n_images, DeltaRange delta_range, double delta_factor) {
    if (n_images < 0) throw InvalidArgument("extend_test_range: n_images must be >= 0");
    if (n_images == 0) return;
    if (!(delta_factor >= 1.0)) throw InvalidArgument("extend_test_range: delta_factor must be >= 1");
    double lo = m.seed_sample.count, hi = m.seed_sample.count;
    for (const auto& e : m.weak_samples) {
        lo = std::min(lo, e.count);
        hi = std::max(hi, e.count);
    }
    const int step_min = std::max(1, static_cast<int>(std::lround(delta_range.min * delta_factor)));
    const int step_max = std::max(step_min, static_cast<int>(std::lround(delta_range.max * delta_factor)));
    const int start = std::max(1, static_cast<int>(lo) - step_max);
    const int stop = static_cast<int>(hi) + step_max;

    Rng rng(derive_seed(m.generator_seed, "test-levels"));
    std::uniform_int_distribution<int> step(step_min, step_max);
    std::vector<int> level_counts{start};
    while (level_counts.back() < stop) level_counts.push_back(std::min(stop, level_counts.back() + step(rng)));

    const std::size_t n_levels = level_counts.size();
    for (int i = 0; i < n_images; ++i) {
        const std::size_t li =
            n_images == 1 ? 0 : static_cast<std::size_t>(std::lround(double(i) * (n_levels - 1) / (n_images - 1)));
        const int count = level_counts[li];
        Scene scene = generate_scene(m.scene_spec, count, derive_seed(m.generator_seed, "test-shot", i));
        ManifestEntry e;
        e.id = "T" + std::to_string(i);
        e.level = -1;
        e.count = count;
        e.image = std::move(scene.image);
        e.dots = std::move(scene.dots);
        m.test_samples.push_back(std::move(e));
    }
}

DatasetSplits split_dataset(const DatasetManifest& m, int train_weak, int val, int test,
                            const DensityOptions& density) {
    if (train_weak < 0 || val < 0 || test < 0) throw InvalidArgument("split_dataset: sizes must be >= 0");
    const std::size_t pool = m.weak_samples.size() + m.val_samples.size();
    const std::size_t available = pool + m.test_samples.size();
    if (static_cast<std::size_t>(train_weak) + val > pool)
        throw InvalidArgument("split_dataset: train_weak + val = " + std::to_string(train_weak + val) +
                              " overlaps; only " + std::to_string(pool) + " re-shoots exist");
    if (static_cast<std::size_t>(train_weak) + val + test != available)
        throw InvalidArgument("split_dataset: train_weak + val + test = " +
                              std::to_string(train_weak + val + test) + " but the manifest holds " +
                              std::to_string(available) + " non-seed images");

    std::vector<const ManifestEntry*> shuffled;
    for (const auto& e : m.weak_samples) shuffled.push_back(&e);
    for (const auto& e : m.val_samples) shuffled.push_back(&e);
    Rng rng(derive_seed(m.generator_seed, "split"));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    DatasetSplits s;
    s.full.push_back({m.seed_sample.image, m.seed_sample.dots, render_density(m.seed_sample.dots, density)});
    std::size_t i = 0;
    for (; i < static_cast<std::size_t>(train_weak); ++i) s.weak.push_back({shuffled[i]->image, shuffled[i]->count});
    for (; i < static_cast<std::size_t>(train_weak + val); ++i) s.val.push_back({shuffled[i]->image, shuffled[i]->count});
    for (; i < shuffled.size(); ++i) {
        s.test.push_back({shuffled[i]->image, shuffled[i]->count});
        s.test_hidden.push_back(shuffled[i]->dots);
    }
    for (const auto& e : m.test_samples) {
        s.test.push_back({e.image, e.count});
        s.test_hidden.push_back(e.dots);
    }
    return s;
}

} // namespace matt
