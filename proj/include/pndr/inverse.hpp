#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pndr/autodiff.hpp"
#include "pndr/compose.hpp"
#include "pndr/gbuffer.hpp"
#include "pndr/randomize.hpp"
#include "pndr/rendernet.hpp"

namespace pndr {

struct UnknownId : Error {
    explicit UnknownId(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct LightNetConfig {
    int hidden = 64;
    int layers = 3;  // hidden layers
    int embedDim = 16;
    double omega0 = 30.0;
};

/// SIREN conditioned on a learned per-scene embedding; outputs a raw 3-vector.
struct LightNetParams {
    LightNetConfig cfg;
    std::vector<std::int64_t> sceneIds;  // row i of the embedding belongs to sceneIds[i]
    std::vector<NamedTensor> tensors;
};

struct MaterialNetConfig {
    int hidden = 64;
    int layers = 2;
    int embedDim = 16;
};

/// MLP over concatenated object and scene embeddings; five sigmoid outputs
/// mapped to albedo RGB, roughness, specularity.
struct MaterialNetParams {
    MaterialNetConfig cfg;
    std::vector<int> objectIds;
    std::vector<std::int64_t> sceneIds;
    std::vector<NamedTensor> tensors;
};

/// SIREN initialization; the output bias starts at `initialDirection` (scene
/// frame, scaled to the light radius) and output weights start small.
LightNetParams init_lightnet(const LightNetConfig& cfg, std::span<const std::int64_t> sceneIds, std::uint64_t seed,
                             const Vec3& initialDirection = {0, 0, 1});
/// Zero output layer, so every material starts at the range midpoints.
MaterialNetParams init_materialnet(const MaterialNetConfig& cfg, std::span<const int> objectIds,
                                   std::span<const std::int64_t> sceneIds, std::uint64_t seed);

/// Tape versions. `weights` holds one Var per tensor in storage order.
template <class T>
ad::Var lightnet_raw(ad::Tape<T>& tape, const LightNetParams& p, std::span<const ad::Var> weights, std::int64_t sceneId);
/// Returns a [5] Var: albedo RGB, roughness, specularity (already range-mapped).
template <class T>
ad::Var materialnet_output(ad::Tape<T>& tape, const MaterialNetParams& p, std::span<const ad::Var> weights,
                           int objectId, std::int64_t sceneId);

LightSample lightnet_forward(const LightNetParams& p, std::int64_t sceneId, const Pose& worldToCamera);
MaterialSample materialnet_forward(const MaterialNetParams& p, int objectId, std::int64_t sceneId);

/// Scene description the recovery renders against.
struct InverseScene {
    GBuffer gbuffer;
    Pose worldToCamera;
    std::int64_t sceneId = 0;
};

enum class RecoverMode { Light, Material, Both };

struct RecoverConfig {
    int steps = 500;
    double learningRate = 1e-2;
    int nInits = 8;
    /// Every init runs this many steps; only the `keepInits` best continue.
    int screenSteps = 60;
    int keepInits = 2;
    /// Stop an init once its loss has not improved by `tolerance` for `patience` steps (0 disables).
    int patience = 60;
    double tolerance = 1e-5;
    std::uint64_t seed = 0;
    LightNetConfig light;
    MaterialNetConfig material;
    /// Held fixed in material mode.
    std::optional<LightSample> knownLight;
    /// Held fixed in light mode; one entry per instance.
    std::vector<MaterialSample> knownMaterials;
};
void validate(const RecoverConfig& cfg);

struct RecoverResult {
    LightSample light;
    std::vector<MaterialSample> materials;
    double loss = 0;
    double initialLoss = 0;
    int bestInit = 0;
    std::vector<double> lossHistory;  // best init, one entry per step (loss before the update)
    LightNetParams lightNet;
    MaterialNetParams materialNet;
};

/// LDR rendering for an explicit light and material list through the same
/// differentiable path the recovery optimizes.
LdrImage render_scene(const NetParams& net, const InverseScene& scene, const LightSample& light,
                      std::span<const MaterialSample> materials);

/// Mean absolute difference over valid pixels and channels.
double photometric_loss(const LdrImage& a, const LdrImage& b, const Mask& valid);

/// Fits LightNet and/or MaterialNet so the frozen renderer reproduces `target`.
RecoverResult recover_scene(const NetParams& net, const LdrImage& target, const InverseScene& scene, RecoverMode mode,
                            const RecoverConfig& cfg);

/// Angle between two light positions seen from the scene center, degrees.
double light_angle_deg(const Vec3& a, const Vec3& b);

}  // namespace pndr
