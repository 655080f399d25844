#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "pndr/image.hpp"
#include "pndr/math.hpp"

namespace pndr {

/// Reported instead of +inf for identical images.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels for images with unit peak value, in dB.
double psnr(const ImageF& a, const ImageF& b);

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Gaussian-windowed SSIM averaged over all fully contained windows, then over channels.
double ssim(const ImageF& a, const ImageF& b, const SsimConfig& cfg = {});

/// Mean distance between model points under the two poses, in the vertices' units.
double add(std::span<const Vec3> vertices, const Pose& gt, const Pose& pred);

/// Mean accuracy over thresholds 5%, 10%, ..., 50% of the object diameter, where
/// accuracy is the fraction of values strictly below the threshold.
double add_auc(std::span<const double> addValues, double diameter);

/// |A and B| / |A or B| over nonzero entries; 1 when both masks are empty.
double iou(const Mask& a, const Mask& b);

/// Mean Euclidean distance between paired points; inputs and result in millimeters.
double correspondence_error(std::span<const Vec3> gtPoints, std::span<const Vec3> predPoints);

struct DepthMetrics {
    double absRel = 0;
    double rmse = 0;
    double delta1 = 0;
};

/// AbsRel, RMSE (squared residuals) and the fraction with max(d/d*, d*/d) < 1.25.
DepthMetrics depth_metrics(const ImageF& pred, const ImageF& gt, const Mask& valid);

struct MetricReport {
    std::map<std::string, double> values;
    std::size_t sampleCount = 0;
    std::map<std::string, double> config;
};

}  // namespace pndr
