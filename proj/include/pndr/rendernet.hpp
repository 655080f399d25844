#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pndr/autodiff.hpp"
#include "pndr/compose.hpp"
#include "pndr/gbuffer.hpp"
#include "pndr/oracle.hpp"
#include "pndr/randomize.hpp"

namespace pndr {

inline constexpr double kNormRadius = 3.0;
inline constexpr int kInputChannels = 15;
inline constexpr int kOutputChannels = 12;
inline constexpr int kBufferGroups = 4;

/// U-shaped encoder-decoder. `levels` counts the 2x downsamplings; level l
/// (0-based) carries baseChannels << l channels.
struct Architecture {
    int levels = 3;
    int baseChannels = 16;
    int inChannels = kInputChannels;
    int outChannels = kOutputChannels;
    int stemChannels = 0;  // per-pixel 1x1 layers before the encoder; 0 disables
    int headChannels = 0;  // 1x1 hidden layer before the output; 0 disables
    bool operator==(const Architecture&) const = default;
};

/// [15, H, W] channels X(3) N(3) A(3) S(1) R(1) Ldir(3) Ldist(1).
using InputField = ad::Tensor<float>;
/// [12, H, W] channels Ddir(3) Dind(3) Gdir(3) Gind(3).
using OutputField = ad::Tensor<float>;

struct NamedTensor {
    std::string name;
    ad::Tensor<float> tensor;
    bool operator==(const NamedTensor&) const = default;
};

struct NetParams {
    Architecture arch;
    std::vector<NamedTensor> tensors;

    std::size_t parameter_count() const;
    bool operator==(const NetParams&) const = default;
};

struct BadResolution : Error {
    explicit BadResolution(const std::string& what) : Error(ErrorKind::InvalidArgument, what) {}
};

/// Parameter names and shapes implied by an architecture, in storage order.
std::vector<NamedTensor> parameter_layout(const Architecture& arch);
/// He-normal kernels, zero biases; the output head starts small with a low bias.
NetParams init_params(const Architecture& arch, std::uint64_t seed);
/// Throws InvalidArgument when names or shapes disagree with the architecture.
void validate_params(const NetParams& params);

InputField assemble_input(const GBuffer& gbuffer, const MaterialMaps& materials, const LightMaps& lights);
/// LightBuffers packed as a [12, H, W] tensor.
OutputField pack_buffers(const LightBuffers& buffers);
LightBuffers split_output(const OutputField& output);

/// Records the network on a tape. `weights` holds one Var per parameter tensor
/// in layout order; `input` is a [inChannels, H, W] tensor.
template <class T>
ad::Var build_rendernet(ad::Tape<T>& tape, const Architecture& arch, std::span<const ad::Var> weights, ad::Var input);

OutputField forward(const NetParams& params, const InputField& input);

/// Mean absolute error over valid pixels and all channels of each group,
/// summed over the four groups.
double l1_loss(const OutputField& pred, const LightBuffers& gt, const Mask& valid);

struct TrainSample {
    InputField input;
    OutputField target;
    Mask valid;
};

/// Summed loss of a batch and its exact gradient, one tensor per parameter.
struct Gradients {
    double loss = 0;
    std::vector<ad::Tensor<float>> tensors;
};
Gradients backward(const NetParams& params, std::span<const TrainSample* const> batch);

struct TrainConfig {
    double learningRate = 1e-4;
    int batchSize = 4;
    int epochs = 1;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};
void validate(const TrainConfig& cfg);

struct TrainResult {
    NetParams params;
    std::vector<double> epochLoss;  // mean per-sample loss seen during each epoch
    std::vector<double> stepLoss;   // mean per-sample loss of each batch
};

/// Called after every epoch with the 1-based epoch index.
using EpochCallback = std::function<void(int epoch, double meanLoss, const NetParams&)>;

/// Adam over shuffled mini-batches; the permutation of each epoch depends only on cfg.seed.
TrainResult train(NetParams params, std::span<const TrainSample> samples, const TrainConfig& cfg,
                  const EpochCallback& onEpoch = {});

LightBuffers predict_buffers(const NetParams& params, const GBuffer& gbuffer, const MaterialMaps& materials,
                             const LightMaps& lights);
/// forward, split, composite with Dcol = A and Gcol = S, tone map.
LdrImage infer_render(const NetParams& params, const GBuffer& gbuffer, const MaterialMaps& materials,
                      const LightMaps& lights);

}  // namespace pndr
