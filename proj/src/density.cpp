#include "matt/density.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace matt {

void DotMap::validate() const {
    if (width <= 0 || height <= 0) throw InvalidArgument("DotMap: width and height must be positive");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height))
            throw InvalidArgument("DotMap: point " + std::to_string(i) + " (" + std::to_string(p.x) +
                                  ", " + std::to_string(p.y) + ") lies outside the " +
                                  std::to_string(width) + "x" + std::to_string(height) + " image");
    }
}

DensityGrid render_density(const DotMap& dots, double sigma, double truncation_radius) {
    if (!(sigma > 0.0)) throw InvalidArgument("render_density: sigma must be positive");
    if (!(truncation_radius >= 2.0))
        throw InvalidArgument("render_density: truncation_radius must be >= 2 (sigma units)");
    dots.validate();

    DensityGrid out(dots.height, dots.width, 0.0);
    const double cutoff = truncation_radius * sigma;
    const double cutoff2 = cutoff * cutoff;
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    const int reach = static_cast<int>(std::ceil(cutoff)) + 1;

    std::vector<std::pair<std::size_t, double>> footprint;
    for (const Point& p : dots.points) {
        footprint.clear();
        const int cx = static_cast<int>(std::floor(p.x));
        const int cy = static_cast<int>(std::floor(p.y));
        double mass = 0.0;
        for (int r = std::max(0, cy - reach); r <= std::min(dots.height - 1, cy + reach); ++r) {
            const double dy = (r + 0.5) - p.y;
            for (int c = std::max(0, cx - reach); c <= std::min(dots.width - 1, cx + reach); ++c) {
                const double dx = (c + 0.5) - p.x;
                const double d2 = dx * dx + dy * dy;
                if (d2 > cutoff2) continue;
                const double w = std::exp(-d2 * inv_two_var);
                footprint.emplace_back(static_cast<std::size_t>(r) * dots.width + c, w);
                mass += w;
            }
        }
        if (footprint.empty() || !(mass > 0.0)) {
            // Cutoff smaller than the distance to any pixel center.
            out.at(cy, cx) += 1.0;
            continue;
        }
        for (const auto& [idx, w] : footprint) out.values[idx] += w / mass;
    }
    return out;
}

double integral(const DensityGrid& d) {
    double s = 0.0;
    for (double v : d.values) s += v;
    return s;
}

KernelSpec make_aux_kernel(int rows, int cols, double sigma) {
    if (rows < 1 || cols < 1 || rows % 2 == 0 || cols % 2 == 0)
        throw InvalidArgument("make_aux_kernel: kernel sides must be odd and positive, got " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    if (!(sigma > 0.0)) throw InvalidArgument("make_aux_kernel: sigma must be positive");
    KernelSpec k{rows, cols, sigma, DenseGrid(rows, cols)};
    const int ry = rows / 2, rx = cols / 2;
    double total = 0.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double dy = r - ry, dx = c - rx;
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k.weights.at(r, c) = w;
            total += w;
        }
    for (double& w : k.weights.values) w /= total;
    return k;
}

std::vector<KernelSpec> default_kernel_bank() { return kernel_bank(4); }

std::vector<KernelSpec> kernel_bank(int k) {
    if (k < 0) throw InvalidArgument("kernel_bank: K must be non-negative");
    static constexpr std::pair<int, int> shapes[] = {
        {3, 3}, {5, 5}, {3, 5}, {5, 3}, {7, 7}, {3, 7}, {7, 3}, {5, 7}, {7, 5},
        {1, 3}, {3, 1}, {1, 5}, {5, 1}, {9, 9}, {3, 9}, {9, 3},
    };
    constexpr int available = static_cast<int>(std::size(shapes));
    if (k > available)
        throw InvalidArgument("kernel_bank: at most " + std::to_string(available) +
                              " distinct kernels are defined");
    std::vector<KernelSpec> bank;
    bank.reserve(k);
    for (int i = 0; i < k; ++i) bank.push_back(make_aux_kernel(shapes[i].first, shapes[i].second, 1.0));
    return bank;
}

} // namespace matt
