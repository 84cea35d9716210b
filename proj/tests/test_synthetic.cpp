#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "matt/error.hpp"
#include "matt/synthetic.hpp"
#include "oracles.hpp"

using namespace matt;

TEST_CASE("scenes place the requested objects far enough apart") {
    SceneSpec spec;
    CHECK(generate_scene(spec, 0, 1).dots.count() == 0);
    for (int n : {1, 10, 60}) {
        const Scene s = generate_scene(spec, n, static_cast<std::uint64_t>(n));
        REQUIRE(s.dots.count() == static_cast<std::size_t>(n));
        for (std::size_t a = 0; a < s.dots.points.size(); ++a) {
            const Point& p = s.dots.points[a];
            CHECK((p.x >= 0.0 && p.x < spec.width && p.y >= 0.0 && p.y < spec.height));
            for (std::size_t b = a + 1; b < s.dots.points.size(); ++b) {
                const Point& q = s.dots.points[b];
                CHECK(std::hypot(p.x - q.x, p.y - q.y) >= spec.min_center_distance);
            }
        }
        for (double v : s.image.values) {
            CHECK((v >= 0.0 && v <= 1.0));
            CHECK(std::round(v * 65535.0) == v * 65535.0);
        }
    }
}

TEST_CASE("scene generation is deterministic per seed") {
    SceneSpec spec;
    spec.category_id = 1;
    const Scene a = generate_scene(spec, 20, 9), b = generate_scene(spec, 20, 9), c = generate_scene(spec, 20, 10);
    CHECK(a.image == b.image);
    CHECK(a.dots.points.size() == b.dots.points.size());
    CHECK_FALSE(a.image == c.image);
}

TEST_CASE("overfull scenes raise a capacity error") {
    SceneSpec spec;
    spec.width = spec.height = 8;
    spec.min_center_distance = 4.0;
    try {
        (void)generate_scene(spec, 50, 1);
        FAIL("expected CapacityError");
    } catch (const CapacityError& e) {
        CHECK(e.requested() == 50);
    }
}

TEST_CASE("the multi-shot sequence propagates labels that match the hidden dots") {
    SceneSpec spec;
    const DatasetManifest m = multishot_sequence(spec, 50, 10, 20, {1, 4}, 42);
    CHECK(m.total() == 200);
    CHECK(m.seed_sample.id == "seed");
    CHECK(m.seed_sample.count == 50.0);
    std::vector<double> level_count(10, -1.0);
    level_count[0] = 50.0;
    for (const auto& e : m.weak_samples) {
        CHECK(e.count == static_cast<double>(e.dots.count()));
        if (level_count[e.level] < 0) level_count[e.level] = e.count;
        CHECK(level_count[e.level] == e.count);
    }
    for (int l = 1; l < 10; ++l) {
        const double d = std::abs(level_count[l] - level_count[l - 1]);
        CHECK((d >= 1.0 && d <= 4.0));
    }
    const DatasetManifest again = multishot_sequence(spec, 50, 10, 20, {1, 4}, 42);
    for (std::size_t i = 0; i < m.weak_samples.size(); ++i) CHECK(m.weak_samples[i].image == again.weak_samples[i].image);
}

TEST_CASE("splits are disjoint, complete, and the test range covers the training range") {
    SceneSpec spec;
    spec.width = spec.height = 32;
    DatasetManifest m = multishot_sequence(spec, 30, 5, 8, {1, 4}, 3);
    extend_test_range(m, 10, {1, 4}, 2.0);
    CHECK(m.test_samples.size() == 10);
    const DatasetSplits s = split_dataset(m, 20, 6, 23);
    CHECK(s.full.size() == 1);
    CHECK(s.weak.size() == 20);
    CHECK(s.val.size() == 6);
    CHECK(s.test.size() == 23);
    CHECK(s.test_hidden.size() == 23);
    CHECK(std::abs(integral(s.full[0].density) - 30.0) < 1e-6);

    std::set<std::vector<double>> seen;
    auto add = [&](const DenseGrid& g) { return seen.insert(g.values).second; };
    CHECK(add(s.full[0].image));
    for (const auto* part : {&s.weak, &s.val, &s.test})
        for (const auto& ci : *part) CHECK(add(ci.image));
    CHECK(seen.size() == 50);

    double lo = 1e9, hi = -1e9, tlo = 1e9, thi = -1e9;
    for (const auto& ci : s.weak) {
        lo = std::min(lo, ci.count);
        hi = std::max(hi, ci.count);
    }
    for (std::size_t i = 0; i < s.test.size(); ++i) {
        tlo = std::min(tlo, s.test[i].count);
        thi = std::max(thi, s.test[i].count);
        CHECK(s.test[i].count == static_cast<double>(s.test_hidden[i].count()));
    }
    CHECK(tlo < lo);
    CHECK(thi > hi);
}

TEST_CASE("synthetic contract violations") {
    SceneSpec spec;
    CHECK_THROWS_AS(multishot_sequence(spec, 20, 10, 2, {1, 4}, 0), InvalidArgument);
    CHECK_THROWS_AS(multishot_sequence(spec, 50, 0, 2, {1, 4}, 0), InvalidArgument);
    CHECK_THROWS_AS(multishot_sequence(spec, 50, 2, 2, {3, 1}, 0), InvalidArgument);
    CHECK_THROWS_AS(generate_scene(spec, -1, 0), InvalidArgument);

    DatasetManifest m = multishot_sequence(spec, 20, 2, 3, {1, 2}, 0);
    CHECK_THROWS_AS(extend_test_range(m, 2, {1, 2}, 0.5), InvalidArgument);
    CHECK_THROWS_AS(split_dataset(m, 4, 2, 0), InvalidArgument);
    CHECK_THROWS_AS(split_dataset(m, 2, 2, 0), InvalidArgument);
    CHECK_THROWS_AS(split_dataset(m, -1, 2, 4), InvalidArgument);

    SceneSpec bad;
    bad.width = 4;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = SceneSpec{};
    bad.object_radius_range = {3.0, 2.0};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = SceneSpec{};
    bad.intensity_range = {0.5, 1.5};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
