#pragma once

// Test-side reference implementations. Nothing here calls the code under
// test except to build graphs that are then checked numerically.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "matt/autodiff.hpp"
#include "matt/density.hpp"
#include "matt/model.hpp"
#include "matt/synthetic.hpp"

namespace oracle {

using matt::DenseGrid;
using matt::ad::Shape;
using matt::ad::Tape;
using matt::ad::Tensor;
using Rng = std::mt19937_64;

inline std::vector<double> uniform(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

// Uniform in [-hi, -gap] U [gap, hi]; keeps kinked ops away from their kink.
inline std::vector<double> away_from_zero(Rng& rng, std::size_t n, double gap = 0.05, double hi = 1.0) {
    std::uniform_real_distribution<double> d(gap, hi);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> v(n);
    for (double& x : v) x = sign(rng) ? d(rng) : -d(rng);
    return v;
}

inline Tensor param(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
    const auto n = matt::ad::shape_size(s);
    return Tensor::parameter(std::move(s), uniform(rng, n, lo, hi));
}

inline Tensor constant(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
    const auto n = matt::ad::shape_size(s);
    return Tensor::constant(std::move(s), uniform(rng, n, lo, hi));
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct GradCheck {
    double max_rel_error = 0.0;
    int coordinates = 0;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps exact zeros comparable.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences with step h on up to `per_leaf` randomly chosen
// coordinates of every leaf, against the tape's reverse-mode gradient.
// `numeric_build`, when given, is the function differentiated numerically
// (for graphs whose analytic gradient deliberately ignores a path).
inline GradCheck check_gradients(std::vector<Tensor> leaves, const std::function<Tensor(Tape&)>& build,
                                 Rng& rng, int per_leaf = 12, double h = 1e-5,
                                 const std::function<Tensor(Tape&)>& numeric_build = {}) {
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        const Tensor loss = build(tape);
        tape.backward(loss);
        for (const Tensor& t : leaves) analytic.emplace_back(t.grad().begin(), t.grad().end());
    }
    auto value = [&] {
        Tape tape;
        return (numeric_build ? numeric_build(tape) : build(tape)).item();
    };
    GradCheck out;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        auto data = leaves[l].mutable_data();
        std::vector<std::size_t> idx(data.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(per_leaf)));
        for (std::size_t i : idx) {
            const double x0 = data[i];
            data[i] = x0 + h;
            const double fp = value();
            data[i] = x0 - h;
            const double fm = value();
            data[i] = x0;
            const double numeric = (fp - fm) / (2.0 * h);
            out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic[l][i], numeric));
            ++out.coordinates;
        }
    }
    return out;
}

// Direct nested-loop cross-correlation with zero "same" padding.
inline std::vector<double> conv2d(const std::vector<double>& x, int cin, int h, int w, const std::vector<double>& k,
                                  int cout, int kh, int kw, const std::vector<double>& bias, int dilation) {
    std::vector<double> y(static_cast<std::size_t>(cout) * h * w, 0.0);
    const int ph = dilation * (kh / 2), pw = dilation * (kw / 2);
    for (int o = 0; o < cout; ++o)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                double s = bias.empty() ? 0.0 : bias[o];
                for (int i = 0; i < cin; ++i)
                    for (int a = 0; a < kh; ++a)
                        for (int b = 0; b < kw; ++b) {
                            const int rr = r + a * dilation - ph, cc = c + b * dilation - pw;
                            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                            s += k[((static_cast<std::size_t>(o) * cin + i) * kh + a) * kw + b] *
                                 x[(static_cast<std::size_t>(i) * h + rr) * w + cc];
                        }
                y[(static_cast<std::size_t>(o) * h + r) * w + c] = s;
            }
    return y;
}

// Density oracle: per-dot Gaussian weights at pixel centres inside the
// truncation disc, normalized per dot; containing pixel when the disc
// catches no pixel centre.
inline DenseGrid density(const matt::DotMap& dots, double sigma, double trunc) {
    DenseGrid g(dots.height, dots.width, 0.0);
    const double radius = trunc * sigma;
    for (const auto& p : dots.points) {
        std::vector<double> w(g.values.size(), 0.0);
        double total = 0.0;
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) {
                const double dx = c + 0.5 - p.x, dy = r + 0.5 - p.y;
                if (dx * dx + dy * dy > radius * radius) continue;
                const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                w[static_cast<std::size_t>(r) * g.cols + c] = v;
                total += v;
            }
        if (total == 0.0) {
            const int c = std::min(static_cast<int>(p.x), g.cols - 1), r = std::min(static_cast<int>(p.y), g.rows - 1);
            g.values[static_cast<std::size_t>(r) * g.cols + c] += 1.0;
            continue;
        }
        for (std::size_t i = 0; i < w.size(); ++i) g.values[i] += w[i] / total;
    }
    return g;
}

inline matt::DotMap random_dots(Rng& rng, int width, int height, int n) {
    matt::DotMap d{width, height, {}};
    std::uniform_real_distribution<double> x(0.0, width), y(0.0, height);
    for (int i = 0; i < n; ++i) {
        matt::Point p{x(rng), y(rng)};
        p.x = std::min(p.x, std::nextafter(static_cast<double>(width), 0.0));
        p.y = std::min(p.y, std::nextafter(static_cast<double>(height), 0.0));
        d.points.push_back(p);
    }
    return d;
}

inline double mae(const std::vector<double>& p, const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - g[i]);
    return s / static_cast<double>(p.size());
}

inline double rmse(const std::vector<double>& p, const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - g[i]) * (p[i] - g[i]);
    return std::sqrt(s / static_cast<double>(p.size()));
}

inline double rer(const std::vector<double>& p, const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - g[i]) / g[i];
    return s / static_cast<double>(p.size());
}

// A small model that keeps gradient checks and short training runs cheap.
inline matt::ModelConfig tiny_model(int k = 2) {
    matt::ModelConfig m;
    m.backbone_channels = {3, 4};
    m.backbone_dilations = {1, 2};
    m.branch_channels = {3, 2, 1};
    m.num_aux_branches = k;
    m.kernel_bank = matt::kernel_bank(k);
    return m;
}

// A_F of one image plus `weak` count-labelled images, 24x24, few objects.
inline matt::DatasetSplits tiny_splits(int weak, int val, std::uint64_t seed) {
    matt::SceneSpec spec;
    spec.width = spec.height = 24;
    matt::DatasetSplits s;
    const matt::Scene seed_scene = matt::generate_scene(spec, 12, seed);
    s.full.push_back({seed_scene.image, seed_scene.dots, matt::render_density(seed_scene.dots)});
    for (int i = 0; i < weak + val; ++i) {
        const matt::Scene sc = matt::generate_scene(spec, 8 + i % 9, seed * 1000 + 1 + static_cast<std::uint64_t>(i));
        matt::CountedImage ci{sc.image, static_cast<double>(sc.dots.count())};
        (i < weak ? s.weak : s.val).push_back(std::move(ci));
    }
    return s;
}

inline bool same_data(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

} // namespace oracle
