#include "pndr/pipeline.hpp"

#include <cstdio>

#include "pndr/compose.hpp"
#include "pndr/rng.hpp"

namespace pndr {

void validate(const RunConfig& cfg) {
    if (cfg.resolution < 8 || cfg.resolution % 8 != 0) throw ConfigError("resolution must be a multiple of 8, >= 8");
    if (cfg.objects < 1 || cfg.objects > 16) throw ConfigError("objects must be in [1, 16]");
    if (!(cfg.floorExtent > 0)) throw ConfigError("floorExtent must be > 0");
    if (cfg.shade.indirectSamples < 0 || cfg.shade.indirectGlossySamples < 0) {
        throw ConfigError("indirectSamples must be >= 0");
    }
}

std::string to_string(MeshSet m) { return m == MeshSet::A ? "A" : "B"; }
std::string to_string(MaterialMode m) { return m == MaterialMode::Albedo ? "A" : "A+S+R"; }
std::string to_string(LightMode m) { return m == LightMode::Fixed ? "fixed" : "dynamic"; }

MeshSet parse_mesh_set(const std::string& s) {
    if (s == "A") return MeshSet::A;
    if (s == "B") return MeshSet::B;
    throw ConfigError("meshSet must be A or B, got '" + s + "'");
}

MaterialMode parse_material_mode(const std::string& s) {
    if (s == "A") return MaterialMode::Albedo;
    if (s == "A+S+R" || s == "ASR") return MaterialMode::Full;
    throw ConfigError("materialMode must be A or A+S+R, got '" + s + "'");
}

LightMode parse_light_mode(const std::string& s) {
    if (s == "fixed") return LightMode::Fixed;
    if (s == "dynamic") return LightMode::Dynamic;
    throw ConfigError("lightMode must be fixed or dynamic, got '" + s + "'");
}

Json to_json(const RunConfig& cfg) {
    return Json{{"resolution", cfg.resolution},
                {"objects", cfg.objects},
                {"meshSet", to_string(cfg.meshSet)},
                {"floorExtent", cfg.floorExtent},
                {"materialMode", to_string(cfg.materialMode)},
                {"lightMode", to_string(cfg.lightMode)},
                {"indirect", cfg.shade.indirectSamples > 0},
                {"indirectSamples", cfg.shade.indirectSamples},
                {"indirectGlossySamples", cfg.shade.indirectGlossySamples},
                {"diffuseModel", cfg.shade.diffuseModel == DiffuseModel::OrenNayar ? "oren-nayar" : "lambertian"}};
}

std::vector<Mesh> mesh_library(MeshSet set) {
    if (set == MeshSet::A) {
        return {make_primitive(PrimitiveKind::Cube, {0.3, 0}), make_primitive(PrimitiveKind::Cylinder, {0.3, 1}),
                make_primitive(PrimitiveKind::Icosphere, {0.3, 2})};
    }
    return {scale_mesh(make_primitive(PrimitiveKind::Cube, {0.3, 0}), {1.4, 1.4, 0.4}),
            scale_mesh(make_primitive(PrimitiveKind::Cylinder, {0.3, 1}), {0.7, 0.7, 1.6}),
            scale_mesh(make_primitive(PrimitiveKind::Icosphere, {0.3, 2}), {1.3, 1.0, 0.6})};
}

SceneGraph generate_scene(const RunConfig& cfg, std::uint64_t seed, std::int64_t sceneId) {
    validate(cfg);
    PlacementOptions opts;
    opts.floorExtent = cfg.floorExtent;
    opts.width = cfg.resolution;
    opts.height = cfg.resolution;
    opts.sceneId = sceneId;
    const auto meshes = mesh_library(cfg.meshSet);
    return place_objects(meshes, Room{}, cfg.objects, seed, opts);
}

SceneContext prepare_scene(const SceneGraph& scene, int resolution) {
    SceneContext ctx{scene, build_bvh(scene), {}};
    ctx.scene.camera.intrinsics = scene.camera.intrinsics.scaled(resolution, resolution);
    ctx.gbuffer = raycast_gbuffer(ctx.scene, ctx.bvh, resolution, resolution);
    return ctx;
}

std::uint64_t light_seed(std::uint64_t datasetSeed, std::int64_t sceneId, int index) {
    return hash_counter(hash_counter(datasetSeed, static_cast<std::uint64_t>(Stream::Light), sceneId),
                        static_cast<std::uint64_t>(Stream::Light), static_cast<std::uint64_t>(index));
}

std::uint64_t material_seed(std::uint64_t datasetSeed, std::int64_t sceneId, int index) {
    return hash_counter(hash_counter(datasetSeed, static_cast<std::uint64_t>(Stream::Material), sceneId),
                        static_cast<std::uint64_t>(Stream::Material), static_cast<std::uint64_t>(index));
}

Randomization randomize(const SceneContext& ctx, const RunConfig& cfg, std::uint64_t lightSeed,
                        std::uint64_t materialSeed) {
    Randomization r;
    r.lightSeed = lightSeed;
    r.materialSeed = materialSeed;
    const Pose& w2c = ctx.scene.worldToCamera;
    r.light = cfg.lightMode == LightMode::Fixed ? fixed_light(w2c) : sample_light(lightSeed, w2c);
    const auto ids = ctx.scene.instance_ids();
    r.materials = cfg.materialMode == MaterialMode::Albedo ? sample_albedo_only(ids, materialSeed)
                                                           : sample_materials(ids, materialSeed);
    return r;
}

RenderedSample render_sample(const SceneContext& ctx, const Randomization& r, const ShadeConfig& shade) {
    RenderedSample s;
    s.randomization = r;
    s.materials = compose_material_maps(ctx.gbuffer, r.materials);
    s.lights = light_maps(ctx.gbuffer, r.light);
    ShadeConfig cfg = shade;
    cfg.seed = hash_counter(shade.seed ^ r.lightSeed, static_cast<std::uint64_t>(Stream::IndirectDiffuse), r.materialSeed);
    s.buffers = render_oracle(ctx.gbuffer, s.materials, s.lights, r.light, ctx.bvh, r.materials,
                              ctx.scene.worldToCamera, cfg);
    return s;
}

TrainSample to_train_sample(const GBuffer& gbuffer, const RenderedSample& s) {
    return {assemble_input(gbuffer, s.materials, s.lights), pack_buffers(s.buffers), gbuffer.valid};
}

LdrImage ldr(const RenderedSample& s) { return render_ldr(s.buffers, s.materials.A, s.materials.S); }

LoadedSample load_sample(const fs::path& manifestPath, const ManifestSample& s) {
    const fs::path base = manifestPath.parent_path();
    LoadedSample out;
    if (!s.scene.empty()) out.scene = load_scene(base / s.scene);
    if (s.gbuffer.empty()) throw ConfigError(manifestPath.string() + ": sample has no gbuffer");
    out.gbuffer = load_gbuffer(base / s.gbuffer);
    if (!s.materialMaps.empty()) {
        out.materials = load_material_maps(base / s.materialMaps);
    } else {
        out.materials = compose_material_maps(out.gbuffer, s.materials);
    }
    out.lights = s.lightMaps.empty() ? light_maps(out.gbuffer, s.light) : load_light_maps(base / s.lightMaps);
    if (!s.lightBuffers.empty()) out.buffers = load_light_buffers(base / s.lightBuffers);
    return out;
}

std::string sample_name(const ManifestSample& s, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "s%04lld_%04d", static_cast<long long>(s.sceneId), index);
    return buf;
}

}  // namespace pndr
