#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "matt/error.hpp"

namespace matt {

/// Row-major 2-D array of doubles. Used for images, density maps and kernels.
struct DenseGrid {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    DenseGrid() = default;
    DenseGrid(int r, int c, double fill = 0.0) : rows(r), cols(c) {
        if (r < 0 || c < 0) throw InvalidArgument("DenseGrid: negative dimension");
        values.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill);
    }
    DenseGrid(int r, int c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
        if (r < 0 || c < 0) throw InvalidArgument("DenseGrid: negative dimension");
        if (values.size() != static_cast<std::size_t>(r) * static_cast<std::size_t>(c))
            throw InvalidArgument("DenseGrid: value count does not match rows*cols");
    }

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return values.size(); }
    double sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

    friend bool operator==(const DenseGrid&, const DenseGrid&) = default;
};

} // namespace matt
