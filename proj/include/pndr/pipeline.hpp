#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pndr/dataio.hpp"

// Dataset stages shared by the command-line tool and the acceptance suite.
namespace pndr {

enum class MeshSet { A, B };
enum class MaterialMode { Albedo, Full };
enum class LightMode { Fixed, Dynamic };

/// Everything that shapes a generated dataset.
struct RunConfig {
    int resolution = 64;
    int objects = 3;
    MeshSet meshSet = MeshSet::A;
    double floorExtent = 0.7;
    MaterialMode materialMode = MaterialMode::Full;
    LightMode lightMode = LightMode::Dynamic;
    ShadeConfig shade;
};
void validate(const RunConfig& cfg);

std::string to_string(MeshSet m);
std::string to_string(MaterialMode m);
std::string to_string(LightMode m);
MeshSet parse_mesh_set(const std::string& s);
MaterialMode parse_material_mode(const std::string& s);
LightMode parse_light_mode(const std::string& s);

Json to_json(const RunConfig& cfg);

/// Set A: cube, cylinder, sphere. Set B: slab, tall cylinder, flattened
/// ellipsoid, none of which appear in set A.
std::vector<Mesh> mesh_library(MeshSet set);

SceneGraph generate_scene(const RunConfig& cfg, std::uint64_t seed, std::int64_t sceneId);

/// Scene geometry resolved once and reused by every randomization.
struct SceneContext {
    SceneGraph scene;
    Bvh bvh;
    GBuffer gbuffer;
};
SceneContext prepare_scene(const SceneGraph& scene, int resolution);

struct Randomization {
    std::uint64_t lightSeed = 0;
    std::uint64_t materialSeed = 0;
    LightSample light;
    std::vector<MaterialSample> materials;
};

/// Seeds of randomization `index` for a dataset seed.
std::uint64_t light_seed(std::uint64_t datasetSeed, std::int64_t sceneId, int index);
std::uint64_t material_seed(std::uint64_t datasetSeed, std::int64_t sceneId, int index);

Randomization randomize(const SceneContext& ctx, const RunConfig& cfg, std::uint64_t lightSeed,
                        std::uint64_t materialSeed);

/// Fully materialized sample: maps, oracle buffers, and the network input.
struct RenderedSample {
    Randomization randomization;
    MaterialMaps materials;
    LightMaps lights;
    LightBuffers buffers;
};
RenderedSample render_sample(const SceneContext& ctx, const Randomization& r, const ShadeConfig& shade);
TrainSample to_train_sample(const GBuffer& gbuffer, const RenderedSample& s);
/// Oracle buffers composited and tone mapped.
LdrImage ldr(const RenderedSample& s);

// Manifest-backed datasets -------------------------------------------------------

/// Loads the scene, maps, and buffers referenced by one manifest sample.
struct LoadedSample {
    SceneGraph scene;
    GBuffer gbuffer;
    MaterialMaps materials;
    LightMaps lights;
    LightBuffers buffers;  // empty when the sample has no buffers yet
};
LoadedSample load_sample(const fs::path& manifestPath, const ManifestSample& s);

/// Stable per-sample directory name.
std::string sample_name(const ManifestSample& s, int index);

}  // namespace pndr
