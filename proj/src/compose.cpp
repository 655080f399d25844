#include "pndr/compose.hpp"

#include <algorithm>
#include <cmath>

namespace pndr {

HdrImage composite_hdr(const LightBuffers& b, const ImageF& Dcol, const ImageF& Gcol) {
    const int h = b.Ddir.height(), w = b.Ddir.width();
    for (const ImageF* img : {&b.Dind, &b.Gdir, &b.Gind, &Dcol, &Gcol}) {
        if (!img->same_shape(h, w) || img->channels() != 3) throw InvalidArgument("composite_hdr: shape mismatch");
    }
    if (b.Ddir.channels() != 3) throw InvalidArgument("composite_hdr: shape mismatch");
    HdrImage out(h, w, 3);
    const auto dd = b.Ddir.data(), di = b.Dind.data(), gd = b.Gdir.data(), gi = b.Gind.data();
    const auto dc = Dcol.data(), gc = Gcol.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = (dd[i] + di[i]) * dc[i] + (gd[i] + gi[i]) * gc[i];
    }
    return out;
}

ImageF specular_color(const ImageF& S) {
    ImageF out(S.height(), S.width(), 3);
    for (std::size_t p = 0; p < S.pixel_count(); ++p) {
        float* v = out.pixel(p);
        v[0] = v[1] = v[2] = S.storage()[p];
    }
    return out;
}

namespace {
constexpr float kBelowOne = 0x1.fffffep-1f;
}

LdrImage tone_map(const HdrImage& hdr) {
    LdrImage out(hdr.height(), hdr.width(), hdr.channels());
    auto in = hdr.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (!std::isfinite(in[i])) throw NumericError("tone_map: non-finite HDR value");
        // The curve tends to 1 from below; keep float rounding from reaching it.
        o[i] = std::min(static_cast<float>(tone_curve(in[i])), kBelowOne);
    }
    return out;
}

LdrImage render_ldr(const LightBuffers& buffers, const ImageF& A, const ImageF& S) {
    return tone_map(composite_hdr(buffers, A, specular_color(S)));
}

}  // namespace pndr
