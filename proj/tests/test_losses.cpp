#include "doctest.h"

#include <cmath>

#include "matt/error.hpp"
#include "matt/losses.hpp"
#include "oracles.hpp"

using namespace matt;

namespace {

// Zero-padded "same" cross-correlation of one h x w map with kernel k.
std::vector<double> blur(std::span<const double> f, int h, int w, const DenseGrid& k) {
    std::vector<double> out(f.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int a = 0; a < k.rows; ++a)
                for (int b = 0; b < k.cols; ++b) {
                    const int yy = y + a - k.rows / 2, xx = x + b - k.cols / 2;
                    if (yy >= 0 && yy < h && xx >= 0 && xx < w) out[y * w + x] += k.at(a, b) * f[yy * w + xx];
                }
    return out;
}

double aux_oracle(const std::vector<ad::Tensor>& maps, const ad::Tensor& f0, const std::vector<KernelSpec>& bank,
                  double c, double b1, double b2) {
    const int h = f0.dim(1), w = f0.dim(2);
    double cons = 0.0, cnt = 0.0;
    for (std::size_t k = 0; k < maps.size(); ++k) {
        const auto bl = blur(maps[k].data(), h, w, bank[k].weights);
        double s = 0.0;
        for (std::size_t i = 0; i < bl.size(); ++i) {
            cons += (bl[i] - f0.data()[i]) * (bl[i] - f0.data()[i]);
            s += maps[k].data()[i];
        }
        cnt += std::abs(s - c);
    }
    return b1 * cons + b2 * cnt;
}

DensityGrid grid_of(const ad::Tensor& t) { return t.channel(0); }

} // namespace

TEST_CASE("density MSE is zero at the truth and matches the direct sum") {
    oracle::Rng rng(1);
    const ad::Tensor f = oracle::param(rng, {1, 6, 7}, 0.0, 0.1);
    {
        ad::Tape tape;
        CHECK(mse_density_loss(tape, f, grid_of(f)).item() == 0.0);
    }
    DensityGrid d(6, 7);
    for (double& v : d.values) v = oracle::uniform(rng, 1, 0.0, 0.1)[0];
    double want = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) want += (f.data()[i] - d.values[i]) * (f.data()[i] - d.values[i]);
    ad::Tape tape;
    CHECK(mse_density_loss(tape, f, d).item() == doctest::Approx(want).epsilon(1e-12));
    CHECK_THROWS_AS(mse_density_loss(tape, f, DensityGrid(7, 6)), InvalidArgument);
}

TEST_CASE("count loss value and gradient sign") {
    const ad::Tensor f = ad::Tensor::parameter({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    for (double c : {3.0, 10.0, 17.0}) {
        ad::Tape tape;
        const ad::Tensor l = count_loss(tape, f, c);
        CHECK(l.item() == std::abs(10.0 - c));
        tape.backward(l);
        const double expect = c < 10.0 ? 1.0 : (c > 10.0 ? -1.0 : 0.0);
        for (double g : f.grad()) CHECK(g == expect);
    }
    ad::Tape tape;
    CHECK_THROWS_AS(count_loss(tape, f, -1.0), InvalidArgument);
}

TEST_CASE("auxiliary loss matches the direct formula") {
    oracle::Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = oracle::uniform_int(rng, 1, 6), h = oracle::uniform_int(rng, 4, 12),
                  w = oracle::uniform_int(rng, 4, 12);
        const auto bank = kernel_bank(k);
        std::vector<ad::Tensor> maps;
        for (int i = 0; i < k; ++i) maps.push_back(oracle::param(rng, {1, h, w}, 0.0, 0.2));
        const ad::Tensor f0 = oracle::param(rng, {1, h, w}, 0.0, 0.2);
        const double c = oracle::uniform(rng, 1, 0.0, 20.0)[0];
        const LossWeights lw{0.01, oracle::uniform(rng, 1, 0.1, 2.0)[0], oracle::uniform(rng, 1, 0.0, 0.1)[0]};
        ad::Tape tape;
        const double got = aux_loss(tape, maps, f0, bank, c, lw).item();
        CHECK(got == doctest::Approx(aux_oracle(maps, f0, bank, c, lw.beta1, lw.beta2)).epsilon(1e-10));
        const AuxTerms t = aux_terms(maps, f0, bank, c);
        CHECK(lw.beta1 * t.consistency + lw.beta2 * t.count == doctest::Approx(got).epsilon(1e-10));
    }
}

TEST_CASE("auxiliary consistency vanishes for a delta kernel and identical maps") {
    oracle::Rng rng(3);
    const ad::Tensor f0 = oracle::param(rng, {1, 5, 5}, 0.0, 1.0);
    KernelSpec delta{1, 1, 1.0, DenseGrid(1, 1, 1.0)};
    const std::vector<KernelSpec> bank{delta};
    const std::vector<ad::Tensor> maps{f0.clone()};
    double total = 0.0;
    for (double v : f0.data()) total += v;
    ad::Tape tape;
    CHECK(aux_loss(tape, maps, f0, bank, total, LossWeights{}).item() == doctest::Approx(0.0).epsilon(1e-12));

    // beta1 = 0 leaves only the count terms.
    ad::Tape t2;
    const LossWeights w{0.01, 0.0, 0.5};
    CHECK(aux_loss(t2, maps, f0, bank, total + 2.0, w).item() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("auxiliary loss stops the gradient into the primary map unless symmetric") {
    oracle::Rng rng(4);
    const auto bank = kernel_bank(2);
    const std::vector<ad::Tensor> maps{oracle::param(rng, {1, 6, 6}, 0.0, 0.2), oracle::param(rng, {1, 6, 6}, 0.0, 0.2)};
    const ad::Tensor f0 = oracle::param(rng, {1, 6, 6}, 0.0, 0.2);
    {
        ad::Tape tape;
        tape.backward(aux_loss(tape, maps, f0, bank, 3.0, LossWeights{}));
        for (double g : f0.grad()) CHECK(g == 0.0);
        bool any = false;
        for (double g : maps[0].grad()) any = any || g != 0.0;
        CHECK(any);
    }
    ad::Tape tape;
    tape.backward(aux_loss(tape, maps, f0, bank, 3.0, LossWeights{}, true));
    bool any = false;
    for (double g : f0.grad()) any = any || g != 0.0;
    CHECK(any);
}

TEST_CASE("kernel-smoothed maps keep their mass away from the border") {
    oracle::Rng rng(5);
    for (const KernelSpec& k : kernel_bank(9)) {
        // Non-zero only at least 4 pixels from every edge, so no mass is clipped.
        std::vector<double> v(20 * 20, 0.0);
        for (int y = 4; y < 16; ++y)
            for (int x = 4; x < 16; ++x) v[y * 20 + x] = oracle::uniform(rng, 1, 0.0, 1.0)[0];
        const ad::Tensor f = ad::Tensor::constant({1, 20, 20}, v);
        ad::Tape tape;
        const ad::Tensor b = tape.kernel_convolve(f, k.weights);
        double in = 0.0, out = 0.0;
        for (double x : f.data()) in += x;
        for (double x : b.data()) out += x;
        CHECK(std::abs(in - out) <= 1e-9);
    }
}

TEST_CASE("loss scales linearly with the weights") {
    oracle::Rng rng(6);
    const auto bank = kernel_bank(3);
    std::vector<ad::Tensor> maps;
    for (int i = 0; i < 3; ++i) maps.push_back(oracle::param(rng, {1, 7, 7}, 0.0, 0.2));
    const ad::Tensor f0 = oracle::param(rng, {1, 7, 7}, 0.0, 0.2);
    ad::Tape t1, t2;
    const double one = aux_loss(t1, maps, f0, bank, 4.0, LossWeights{0.01, 1.0, 0.02}).item();
    const double three = aux_loss(t2, maps, f0, bank, 4.0, LossWeights{0.01, 3.0, 0.06}).item();
    CHECK(three == doctest::Approx(3.0 * one).epsilon(1e-12));
}

TEST_CASE("base loss mixes density and count items") {
    oracle::Rng rng(7);
    const ad::Tensor a = oracle::param(rng, {1, 4, 4}, 0.0, 0.5), b = oracle::param(rng, {1, 4, 4}, 0.0, 0.5);
    DensityGrid d(4, 4, 0.1);
    const LossWeights w{0.25, 1.0, 0.01};
    double sq = 0.0, sb = 0.0;
    for (double v : a.data()) sq += (v - 0.1) * (v - 0.1);
    for (double v : b.data()) sb += v;
    const std::vector<BaseLossItem> batch{{a, d, std::nullopt}, {b, std::nullopt, 5.0}};
    ad::Tape tape;
    CHECK(base_loss(tape, batch, w).item() == doctest::Approx(sq + 0.25 * std::abs(sb - 5.0)).epsilon(1e-12));

    CHECK_THROWS_AS(base_loss(tape, std::vector<BaseLossItem>{}, w), InvalidArgument);
    CHECK_THROWS_AS(base_loss(tape, std::vector<BaseLossItem>{{a, d, 1.0}}, w), InvalidArgument);
    CHECK_THROWS_AS(base_loss(tape, std::vector<BaseLossItem>{{a, std::nullopt, std::nullopt}}, w), InvalidArgument);
}

TEST_CASE("auxiliary loss contract violations") {
    oracle::Rng rng(8);
    const ad::Tensor f0 = oracle::param(rng, {1, 5, 5});
    const std::vector<ad::Tensor> one{oracle::param(rng, {1, 5, 5})};
    ad::Tape tape;
    CHECK_THROWS_AS(aux_loss(tape, std::vector<ad::Tensor>{}, f0, std::vector<KernelSpec>{}, 1.0, LossWeights{}),
                    InvalidArgument);
    CHECK_THROWS_AS(aux_loss(tape, one, f0, kernel_bank(2), 1.0, LossWeights{}), InvalidArgument);
    const std::vector<ad::Tensor> wrong{oracle::param(rng, {1, 5, 6})};
    CHECK_THROWS_AS(aux_loss(tape, wrong, f0, kernel_bank(1), 1.0, LossWeights{}), InvalidArgument);
    CHECK_THROWS_AS((LossWeights{-1.0, 1.0, 1.0}.validate()), InvalidArgument);
    CHECK_THROWS_AS((LossWeights{0.0, std::nan(""), 1.0}.validate()), InvalidArgument);
}
