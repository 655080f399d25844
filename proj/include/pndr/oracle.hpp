#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "pndr/gbuffer.hpp"
#include "pndr/image.hpp"
#include "pndr/randomize.hpp"

namespace pndr {

/// Four linear-HDR shading buffers. Diffuse buffers exclude albedo and glossy
/// buffers exclude specular color; both re-enter at compositing.
struct LightBuffers {
    ImageF Ddir, Dind, Gdir, Gind;  // 3 channels each

    LightBuffers() = default;
    LightBuffers(int height, int width)
        : Ddir(height, width, 3), Dind(height, width, 3), Gdir(height, width, 3), Gind(height, width, 3) {}
    int height() const { return Ddir.height(); }
    int width() const { return Ddir.width(); }
};

enum class DiffuseModel { OrenNayar, Lambertian };

struct ShadeConfig {
    int indirectSamples = 16;       // cosine-weighted gather rays; 0 disables indirect light
    int indirectGlossySamples = 8;  // GGX-sampled gather rays
    double shadowEpsilon = 1e-4;
    std::uint64_t seed = 0;
    DiffuseModel diffuseModel = DiffuseModel::OrenNayar;
};

/// Qualitative Oren-Nayar factor A + B max(0, cos phi) sin(alpha) tan(beta);
/// 1 when sigma = 0. Clamped to 1.1 at grazing configurations.
double oren_nayar_factor(double nDotL, double nDotV, double phiDiff, double sigma);
double oren_nayar_factor_cos(double nDotL, double nDotV, double cosPhiDiff, double sigma);

inline constexpr double kOrenNayarMax = 1.1;
inline double roughness_to_alpha(double r) { return r * r; }
inline double roughness_to_sigma(double r) { return r * kPi / 4.0; }

double ggx_distribution(double nDotH, double alpha);
/// Smith Lambda for GGX at the given cosine.
double ggx_lambda(double cosTheta, double alpha);
/// GGX microfacet BRDF without Fresnel, height-correlated Smith masking.
double ggx_specular(const Vec3& n, const Vec3& wi, const Vec3& wo, double alpha);

/// Local-frame samplers (z is the normal).
Vec3 sample_cosine_hemisphere(double u1, double u2);
Vec3 sample_ggx_half_vector(double u1, double u2, double alpha);

struct DirectBuffers {
    ImageF Ddir, Gdir;
};
struct IndirectBuffers {
    ImageF Dind, Gind;
};

DirectBuffers shade_direct(const GBuffer& gbuffer, const MaterialMaps& materials, const LightMaps& lightMaps,
                           const LightSample& light, const Bvh& bvh, const Pose& worldToCamera,
                           const ShadeConfig& cfg);

/// One-bounce gather. Secondary hits contribute their direct diffuse radiance
/// including albedo, so per-instance materials are needed for off-screen hits.
IndirectBuffers shade_indirect(const GBuffer& gbuffer, const MaterialMaps& materials, const LightSample& light,
                               const Bvh& bvh, std::span<const MaterialSample> instanceMaterials,
                               const Pose& worldToCamera, const ShadeConfig& cfg);

LightBuffers render_oracle(const GBuffer& gbuffer, const MaterialMaps& materials, const LightMaps& lightMaps,
                           const LightSample& light, const Bvh& bvh,
                           std::span<const MaterialSample> instanceMaterials, const Pose& worldToCamera,
                           const ShadeConfig& cfg);

}  // namespace pndr
