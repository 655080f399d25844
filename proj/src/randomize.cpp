#include "pndr/randomize.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "pndr/parallel.hpp"
#include "pndr/rng.hpp"

namespace pndr {

LightSample light_at(const Vec3& positionScene, const Pose& worldToCamera, double intensity) {
    return {positionScene, worldToCamera.apply(positionScene), intensity};
}

LightSample sample_light(std::uint64_t seed, const Pose& worldToCamera, double intensity) {
    const auto stream = static_cast<std::uint64_t>(Stream::Light);
    // z uniform in [0,1] with uniform azimuth is uniform by solid angle.
    const double z = uniform01(seed, stream, 0);
    const double phi = 2.0 * kPi * uniform01(seed, stream, 1);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 dir{r * std::cos(phi), r * std::sin(phi), z};
    return light_at(dir * kLightRadius, worldToCamera, intensity);
}

LightSample fixed_light(const Pose& worldToCamera, double intensity) {
    const double c = std::sqrt(0.5);
    return light_at(Vec3{c, 0.0, c} * kLightRadius, worldToCamera, intensity);
}

LightMaps light_maps(const GBuffer& g, const LightSample& light) {
    if (g.valid_count() == 0) throw InvalidArgument("light maps need at least one valid pixel");
    LightMaps maps{ImageF(g.height, g.width, 3), ImageF(g.height, g.width, 1)};
    const Vec3 lp = light.positionCamera;
    for (std::size_t p = 0; p < g.X.pixel_count(); ++p) {
        if (!g.valid.storage()[p]) continue;
        const float* x = g.X.pixel(p);
        const Vec3 d = lp - Vec3{x[0], x[1], x[2]};
        const double dist = length(d);
        if (dist < 1e-6) throw DegenerateGeometry("pixel " + std::to_string(p) + " coincides with the light");
        const Vec3 dir = d / dist;
        float* out = maps.Ldir.pixel(p);
        out[0] = static_cast<float>(dir.x);
        out[1] = static_cast<float>(dir.y);
        out[2] = static_cast<float>(dir.z);
        maps.Ldist.storage()[p] = static_cast<float>(dist);
    }
    return maps;
}

namespace {

void check_ids(std::span<const int> ids) {
    if (ids.empty()) throw InvalidArgument("object id list is empty");
    std::set<int> seen(ids.begin(), ids.end());
    if (seen.size() != ids.size()) throw InvalidArgument("object ids must be unique");
}

double draw(std::uint64_t seed, int objectId, int k) {
    return uniform01(seed, static_cast<std::uint64_t>(Stream::Material),
                     static_cast<std::uint64_t>(static_cast<std::uint32_t>(objectId)) * 8 + k);
}

}  // namespace

std::vector<MaterialSample> sample_materials(std::span<const int> objectIds, std::uint64_t seed) {
    check_ids(objectIds);
    std::vector<MaterialSample> out;
    out.reserve(objectIds.size());
    for (int id : objectIds) {
        MaterialSample m;
        m.objectId = id;
        m.albedoRgb = {draw(seed, id, 0), draw(seed, id, 1), draw(seed, id, 2)};
        m.roughness = kMinRoughness + (1.0 - kMinRoughness) * draw(seed, id, 3);
        m.specularity = draw(seed, id, 4);
        out.push_back(m);
    }
    return out;
}

std::vector<MaterialSample> sample_albedo_only(std::span<const int> objectIds, std::uint64_t seed) {
    auto out = sample_materials(objectIds, seed);
    for (auto& m : out) {
        m.roughness = kFixedRoughness;
        m.specularity = kFixedSpecularity;
    }
    return out;
}

const MaterialSample& find_material(std::span<const MaterialSample> samples, int objectId) {
    for (const auto& m : samples) {
        if (m.objectId == objectId) return m;
    }
    throw MissingMaterial("no material sample for instance " + std::to_string(objectId));
}

MaterialMaps compose_material_maps(const GBuffer& g, std::span<const MaterialSample> samples) {
    MaterialMaps maps{ImageF(g.height, g.width, 3), ImageF(g.height, g.width, 1), ImageF(g.height, g.width, 1)};
    for (std::size_t p = 0; p < g.X.pixel_count(); ++p) {
        if (!g.valid.storage()[p]) continue;
        const MaterialSample& m = find_material(samples, g.instance.storage()[p]);
        const double base = g.baseAlbedo.storage()[p];
        float* a = maps.A.pixel(p);
        for (int c = 0; c < 3; ++c) a[c] = static_cast<float>(m.albedoRgb[c] * base);
        maps.R.storage()[p] = static_cast<float>(m.roughness);
        maps.S.storage()[p] = static_cast<float>(m.specularity);
    }
    return maps;
}

}  // namespace pndr
