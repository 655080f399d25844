#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pndr/gbuffer.hpp"
#include "pndr/image.hpp"
#include "pndr/math.hpp"

namespace pndr {

inline constexpr double kLightRadius = 1.5;
inline constexpr double kDefaultLightIntensity = 3.0;
inline constexpr double kMinRoughness = 0.05;

struct LightSample {
    Vec3 positionScene;
    Vec3 positionCamera;
    double intensity = kDefaultLightIntensity;
    bool operator==(const LightSample&) const = default;
};

/// Per-pixel direction (pixel -> light) and distance, camera frame.
struct LightMaps {
    ImageF Ldir;   // 3 channels
    ImageF Ldist;  // 1 channel
};

struct MaterialSample {
    int objectId = 0;
    Vec3 albedoRgb{0.5, 0.5, 0.5};
    double roughness = 0.5;
    double specularity = 0.5;
    bool operator==(const MaterialSample&) const = default;
};

struct MaterialMaps {
    ImageF A;  // 3 channels
    ImageF R;  // 1 channel
    ImageF S;  // 1 channel
};

struct DegenerateGeometry : Error {
    explicit DegenerateGeometry(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

struct MissingMaterial : Error {
    explicit MissingMaterial(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Light on the upper hemisphere of radius 1.5 m, uniform by solid angle.
LightSample sample_light(std::uint64_t seed, const Pose& worldToCamera,
                         double intensity = kDefaultLightIntensity);
/// Places a light at a scene-frame position (used for fixed-light runs).
LightSample light_at(const Vec3& positionScene, const Pose& worldToCamera,
                     double intensity = kDefaultLightIntensity);
/// The fixed light of lightMode = fixed: 45 degrees elevation, azimuth 0.
LightSample fixed_light(const Pose& worldToCamera, double intensity = kDefaultLightIntensity);

LightMaps light_maps(const GBuffer& gbuffer, const LightSample& light);

/// Uniform albedo in [0,1]^3, roughness in [Rmin,1], specularity in [0,1];
/// draws are keyed by object id so list order does not matter.
std::vector<MaterialSample> sample_materials(std::span<const int> objectIds, std::uint64_t seed);

/// Albedo-only randomization: roughness and specularity pinned to constants.
inline constexpr double kFixedRoughness = 0.5;
inline constexpr double kFixedSpecularity = 0.5;
std::vector<MaterialSample> sample_albedo_only(std::span<const int> objectIds, std::uint64_t seed);

const MaterialSample& find_material(std::span<const MaterialSample> samples, int objectId);

MaterialMaps compose_material_maps(const GBuffer& gbuffer, std::span<const MaterialSample> samples);

}  // namespace pndr
