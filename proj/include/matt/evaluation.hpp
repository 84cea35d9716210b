#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matt/model.hpp"
#include "matt/synthetic.hpp"

namespace matt {

/// Mean absolute error.
double mae(std::span<const double> pred, std::span<const double> gt);
/// Root of the mean squared error (the counting literature calls it MSE).
double mse_metric(std::span<const double> pred, std::span<const double> gt);
/// Mean of per-image |pred - gt| / gt, stored raw (not x100).
double rer(std::span<const double> pred, std::span<const double> gt);

struct MetricsReport {
    int n_images = 0;
    double mae = 0.0;
    double mse = 0.0;
    double rer = 0.0;
    std::vector<std::pair<double, double>> per_image; // (predicted, ground truth)
};

MetricsReport make_report(std::span<const double> pred, std::span<const double> gt);

/// Predicted count per image is the sum of the primary density map.
MetricsReport evaluate_model(const ModelParams& params, std::span<const CountedImage> samples);

} // namespace matt
