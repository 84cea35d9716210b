#include "doctest.h"

#include "matt/error.hpp"
#include "matt/evaluation.hpp"
#include "matt/experiments.hpp"
#include "oracles.hpp"

using namespace matt;

TEST_CASE("metrics on hand-computed examples") {
    const std::vector<double> p{8.0, 12.0, 20.0}, g{10.0, 10.0, 20.0};
    CHECK(mae(p, g) == doctest::Approx(4.0 / 3.0));
    CHECK(mse_metric(p, g) == doctest::Approx(std::sqrt(8.0 / 3.0)));
    CHECK(rer(p, g) == doctest::Approx(0.4 / 3.0));
    const MetricsReport r = make_report(p, g);
    CHECK(r.n_images == 3);
    CHECK(r.per_image[1] == std::pair<double, double>{12.0, 10.0});
}

TEST_CASE("metrics agree with the direct loops and MAE never exceeds root MSE") {
    oracle::Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto n = static_cast<std::size_t>(oracle::uniform_int(rng, 1, 40));
        const auto g = oracle::uniform(rng, n, 1.0, 200.0), p = oracle::uniform(rng, n, 0.0, 250.0);
        CHECK(mae(p, g) == doctest::Approx(oracle::mae(p, g)).epsilon(1e-12));
        CHECK(mse_metric(p, g) == doctest::Approx(oracle::rmse(p, g)).epsilon(1e-12));
        CHECK(rer(p, g) == doctest::Approx(oracle::rer(p, g)).epsilon(1e-12));
        CHECK(mae(p, g) <= mse_metric(p, g) + 1e-12);
    }
}

TEST_CASE("metric contract violations") {
    const std::vector<double> a{1.0, 2.0}, b{1.0};
    CHECK_THROWS_AS(mae(a, b), InvalidArgument);
    CHECK_THROWS_AS(mse_metric(std::vector<double>{}, std::vector<double>{}), InvalidArgument);
    CHECK_THROWS_AS(rer(a, std::vector<double>{1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(evaluate_model(init_model(oracle::tiny_model(0), 0), std::vector<CountedImage>{}),
                    InvalidArgument);
}

TEST_CASE("a zero model's MAE is the mean ground-truth count") {
    ModelParams p = init_model(oracle::tiny_model(1), 0);
    for (auto t : p.tensors())
        for (double& v : t.mutable_data()) v = 0.0;
    const DatasetSplits s = oracle::tiny_splits(0, 6, 1);
    double mean = 0.0;
    for (const auto& ci : s.val) mean += ci.count;
    mean /= static_cast<double>(s.val.size());
    const MetricsReport r = evaluate_model(p, s.val);
    CHECK(r.mae == doctest::Approx(mean).epsilon(1e-12));
    CHECK(r.rer == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matt with K = 0 reproduces baseline2") {
    const DatasetSplits s = [] {
        DatasetSplits t = oracle::tiny_splits(6, 3, 2);
        t.test = t.val;
        return t;
    }();
    TrainConfig base;
    base.epochs = 2;
    base.model = oracle::tiny_model(2);
    base.mode_learning_rates.clear();
    const Variant k0 = sweep_variants(base, "branches=0")[0];
    CHECK(k0.label == "K=0");
    Variant b2{"baseline2", base};
    b2.config.mode = TrainMode::Baseline2;
    const ResultRow a = run_variant(s, k0, 1), b = run_variant(s, b2, 1);
    CHECK(a.mae == b.mae);
    CHECK(a.mse == b.mse);
    CHECK(a.rer == b.rer);
}

TEST_CASE("comparisons are deterministic and summaries use the sample deviation") {
    DatasetSplits s = oracle::tiny_splits(4, 2, 3);
    s.test = s.val;
    TrainConfig base;
    base.epochs = 1;
    base.model = oracle::tiny_model(1);
    const auto variants = comparison_variants(base);
    REQUIRE(variants.size() == 3);
    const std::vector<std::uint64_t> seeds{0, 1};
    const auto a = run_variants(s, variants, seeds), b = run_variants(s, variants, seeds);
    CHECK(results_csv(a) == results_csv(b));
    REQUIRE(a.size() == 6);
    CHECK(a[0].method == "baseline1");
    CHECK(a[5].method == "matt");
    CHECK(a[5].seed == 1);

    const auto sum = summarize(a);
    REQUIRE(sum.size() == 3);
    const double m = (a[0].mae + a[1].mae) / 2.0;
    CHECK(sum[0].mae_mean == doctest::Approx(m));
    CHECK(sum[0].mae_std == doctest::Approx(std::abs(a[0].mae - a[1].mae) / std::sqrt(2.0)));
    CHECK(results_csv(a).rfind("method,seed,split,mae,mse,rer,n_images,runtime_seconds\n", 0) == 0);
}

TEST_CASE("sweep names") {
    const TrainConfig base;
    CHECK(sweep_variants(base, "branches").size() == 9);
    const auto r = sweep_variants(base, "branches=2..4");
    REQUIRE(r.size() == 3);
    CHECK(r[2].config.model.num_aux_branches == 4);
    CHECK(sweep_variants(base, "symmetry").size() == 2);
    CHECK(sweep_variants(base, "lossterms").size() == 3);
    CHECK(sweep_variants(base, "fully").size() == 2);
    CHECK_THROWS_AS(sweep_variants(base, "branches=4..2"), InvalidArgument);
    CHECK_THROWS_AS(sweep_variants(base, "nope"), InvalidArgument);
    CHECK(format_number(1.0 / 3.0) == "0.333333");
}
