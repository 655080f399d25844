#include "pndr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pndr {

namespace {

void require_same(const ImageF& a, const ImageF& b, const char* op) {
    if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels()) {
        throw InvalidArgument(std::string(op) + ": shape mismatch");
    }
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double c = 0.5 * (size - 1);
    double total = 0;
    for (int i = 0; i < size; ++i) {
        k[i] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
        total += k[i];
    }
    for (double& v : k) v /= total;
    return k;
}

/// Valid-region separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int oh = h - n + 1, ow = w - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

double psnr(const ImageF& a, const ImageF& b) {
    require_same(a, b, "psnr");
    if (a.empty()) throw InvalidArgument("psnr: empty image");
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse == 0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const ImageF& a, const ImageF& b, const SsimConfig& cfg) {
    require_same(a, b, "ssim");
    if (cfg.window < 1 || !(cfg.sigma > 0)) throw InvalidArgument("ssim: invalid window");
    if (a.height() < cfg.window || a.width() < cfg.window) {
        throw InvalidArgument("ssim: image smaller than the " + std::to_string(cfg.window) + "x" +
                              std::to_string(cfg.window) + " window");
    }
    const int h = a.height(), w = a.width(), ch = a.channels();
    const auto k = gaussian_kernel(cfg.window, cfg.sigma);
    const std::size_t plane = a.pixel_count();
    double total = 0;
    for (int c = 0; c < ch; ++c) {
        std::vector<double> pa(plane), pb(plane), aa(plane), bb(plane), ab(plane);
        for (std::size_t p = 0; p < plane; ++p) {
            pa[p] = a.pixel(p)[c];
            pb[p] = b.pixel(p)[c];
            aa[p] = pa[p] * pa[p];
            bb[p] = pb[p] * pb[p];
            ab[p] = pa[p] * pb[p];
        }
        const auto ma = filter_valid(pa, h, w, k), mb = filter_valid(pb, h, w, k);
        const auto saa = filter_valid(aa, h, w, k), sbb = filter_valid(bb, h, w, k), sab = filter_valid(ab, h, w, k);
        double sum = 0;
        for (std::size_t i = 0; i < ma.size(); ++i) {
            const double va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i], cov = sab[i] - ma[i] * mb[i];
            sum += ((2 * ma[i] * mb[i] + cfg.c1) * (2 * cov + cfg.c2)) /
                   ((ma[i] * ma[i] + mb[i] * mb[i] + cfg.c1) * (va + vb + cfg.c2));
        }
        total += sum / static_cast<double>(ma.size());
    }
    return total / ch;
}

double add(std::span<const Vec3> vertices, const Pose& gt, const Pose& pred) {
    if (vertices.empty()) throw InvalidArgument("add: mesh has no vertices");
    double sum = 0;
    for (const Vec3& v : vertices) sum += length(gt.apply(v) - pred.apply(v));
    return sum / static_cast<double>(vertices.size());
}

double add_auc(std::span<const double> addValues, double diameter) {
    if (!(diameter > 0)) throw InvalidArgument("add_auc: diameter must be positive");
    if (addValues.empty()) throw InvalidArgument("add_auc: no values");
    double sum = 0;
    for (int step = 1; step <= 10; ++step) {
        const double threshold = 0.05 * step * diameter;
        std::size_t hits = 0;
        for (double v : addValues) hits += v < threshold ? 1 : 0;
        sum += static_cast<double>(hits) / static_cast<double>(addValues.size());
    }
    return sum / 10.0;
}

double iou(const Mask& a, const Mask& b) {
    if (!a.same_extent(b) || a.channels() != b.channels()) throw InvalidArgument("iou: shape mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a.data()[i] != 0, y = b.data()[i] != 0;
        inter += (x && y) ? 1 : 0;
        uni += (x || y) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double correspondence_error(std::span<const Vec3> gtPoints, std::span<const Vec3> predPoints) {
    if (gtPoints.size() != predPoints.size()) throw InvalidArgument("correspondence_error: length mismatch");
    if (gtPoints.empty()) throw InvalidArgument("correspondence_error: no points");
    double sum = 0;
    for (std::size_t i = 0; i < gtPoints.size(); ++i) sum += length(gtPoints[i] - predPoints[i]);
    return sum / static_cast<double>(gtPoints.size());
}

DepthMetrics depth_metrics(const ImageF& pred, const ImageF& gt, const Mask& valid) {
    require_same(pred, gt, "depth_metrics");
    if (pred.channels() != 1 || !valid.same_extent(gt)) throw InvalidArgument("depth_metrics: shape mismatch");
    double rel = 0, sq = 0;
    std::size_t n = 0, good = 0;
    for (std::size_t p = 0; p < gt.pixel_count(); ++p) {
        if (!valid.pixel(p)[0]) continue;
        const double d = pred.pixel(p)[0], t = gt.pixel(p)[0];
        if (!(t > 0)) throw InvalidArgument("depth_metrics: ground-truth depth must be positive on the mask");
        rel += std::abs(d - t) / t;
        sq += (d - t) * (d - t);
        good += std::max(d / t, t / d) < 1.25 ? 1 : 0;
        ++n;
    }
    if (n == 0) throw InvalidArgument("depth_metrics: empty mask");
    return {rel / n, std::sqrt(sq / n), static_cast<double>(good) / n};
}

}  // namespace pndr
