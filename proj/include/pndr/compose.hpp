#pragma once

#include "pndr/image.hpp"
#include "pndr/oracle.hpp"

namespace pndr {

/// Linear HDR radiance, 3 channels.
using HdrImage = ImageF;
/// Display-referred image, 3 channels in [0, 1).
using LdrImage = ImageF;

/// I = (Ddir + Dind) * Dcol + (Gdir + Gind) * Gcol, per channel.
HdrImage composite_hdr(const LightBuffers& buffers, const ImageF& Dcol, const ImageF& Gcol);

/// Achromatic specular color: S broadcast to three channels.
ImageF specular_color(const ImageF& S);

inline constexpr double kToneThreshold = 0.004;

/// Hejl / Burgess-Dawson filmic curve. Gamma is already baked into the fit.
inline double tone_curve(double hdr) {
    const double x = hdr > kToneThreshold ? hdr - kToneThreshold : 0.0;
    return x * (6.2 * x + 0.5) / (x * (6.2 * x + 1.7) + 0.06);
}
/// d tone_curve / d hdr; 0 at and below the threshold.
inline double tone_curve_derivative(double hdr) {
    if (!(hdr > kToneThreshold)) return 0.0;
    const double x = hdr - kToneThreshold;
    const double num = x * (6.2 * x + 0.5), den = x * (6.2 * x + 1.7) + 0.06;
    const double dnum = 12.4 * x + 0.5, dden = 12.4 * x + 1.7;
    return (dnum * den - num * dden) / (den * den);
}

LdrImage tone_map(const HdrImage& hdr);

/// composite_hdr followed by tone_map with Dcol = A and Gcol = S.
LdrImage render_ldr(const LightBuffers& buffers, const ImageF& A, const ImageF& S);

}  // namespace pndr
