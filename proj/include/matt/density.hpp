#pragma once

#include <vector>

#include "matt/grid.hpp"

namespace matt {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Location-level annotation: one point per object, sub-pixel coordinates.
/// Pixel (row r, col c) covers [c, c+1) x [r, r+1).
struct DotMap {
    int width = 0;
    int height = 0;
    std::vector<Point> points;

    std::size_t count() const { return points.size(); }
    /// Throws InvalidArgument if any point is out of bounds.
    void validate() const;

    friend bool operator==(const DotMap&, const DotMap&) = default;
};

/// Non-negative per-pixel density whose sum is the object count.
using DensityGrid = DenseGrid;

/// Fixed auxiliary kernel h_k: truncated, unit-sum Gaussian.
struct KernelSpec {
    int rows = 0;
    int cols = 0;
    double sigma = 1.0;
    DenseGrid weights;
};

struct DensityOptions {
    double sigma = 2.0;
    double truncation_radius = 4.0; // in units of sigma
};

/// Sum of isotropic Gaussians, one per dot, each truncated at
/// truncation_radius * sigma and clipped to the image, then rescaled to
/// carry exactly unit mass.
DensityGrid render_density(const DotMap& dots, double sigma, double truncation_radius);
inline DensityGrid render_density(const DotMap& dots, const DensityOptions& opt = {}) {
    return render_density(dots, opt.sigma, opt.truncation_radius);
}

double integral(const DensityGrid& d);

KernelSpec make_aux_kernel(int rows, int cols, double sigma = 1.0);

/// 3x3, 5x5, 3x5, 5x3 at sigma 1.
std::vector<KernelSpec> default_kernel_bank();

/// First K kernels of the default bank; beyond four, further distinct odd
/// shapes (7x7, 3x7, 7x3, 5x7, 7x5, ...) at sigma 1.
std::vector<KernelSpec> kernel_bank(int k);

} // namespace matt
