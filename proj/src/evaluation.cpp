#include "matt/evaluation.hpp"

#include <cmath>

namespace matt {

namespace {
void check_lengths(std::span<const double> pred, std::span<const double> gt, const char* name) {
    if (pred.size() != gt.size())
        throw InvalidArgument(std::string(name) + ": " + std::to_string(pred.size()) + " predictions for " +
                              std::to_string(gt.size()) + " ground-truth values");
    if (pred.empty()) throw InvalidArgument(std::string(name) + ": needs at least one image");
}
} // namespace

double mae(std::span<const double> pred, std::span<const double> gt) {
    check_lengths(pred, gt, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - gt[i]);
    return s / static_cast<double>(pred.size());
}

double mse_metric(std::span<const double> pred, std::span<const double> gt) {
    check_lengths(pred, gt, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - gt[i]) * (pred[i] - gt[i]);
    return std::sqrt(s / static_cast<double>(pred.size()));
}

double rer(std::span<const double> pred, std::span<const double> gt) {
    check_lengths(pred, gt, "rer");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!(gt[i] > 0.0))
            throw InvalidArgument("rer: ground truth at index " + std::to_string(i) + " is not positive");
        s += std::abs(pred[i] - gt[i]) / gt[i];
    }
    return s / static_cast<double>(pred.size());
}

MetricsReport make_report(std::span<const double> pred, std::span<const double> gt) {
    MetricsReport r;
    r.n_images = static_cast<int>(pred.size());
    r.mae = mae(pred, gt);
    r.mse = mse_metric(pred, gt);
    r.rer = rer(pred, gt);
    for (std::size_t i = 0; i < pred.size(); ++i) r.per_image.emplace_back(pred[i], gt[i]);
    return r;
}

MetricsReport evaluate_model(const ModelParams& params, std::span<const CountedImage> samples) {
    if (samples.empty()) throw InvalidArgument("evaluate_model: no samples");
    std::vector<double> pred, gt;
    for (const auto& s : samples) {
        pred.push_back(predict_count(params, s.image));
        gt.push_back(s.count);
    }
    return make_report(pred, gt);
}

} // namespace matt
