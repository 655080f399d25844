#include "pndr/rendernet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pndr/parallel.hpp"
#include "pndr/rng.hpp"

namespace pndr {

namespace {

constexpr int kKernel = 3;
constexpr double kHeadScale = 0.1;
constexpr double kHeadBiasTarget = 0.1;

int channels_at(const Architecture& arch, int level) { return arch.baseChannels << level; }

void add_conv(std::vector<NamedTensor>& out, const std::string& name, int in, int outCh, int k = kKernel) {
    out.push_back({name + ".weight", ad::Tensor<float>({outCh, in, k, k})});
    out.push_back({name + ".bias", ad::Tensor<float>({outCh})});
}

void check_arch(const Architecture& arch) {
    if (arch.levels < 0 || arch.levels > 8 || arch.baseChannels < 1 || arch.inChannels < 1 ||
        arch.outChannels < 1 || arch.stemChannels < 0 || arch.headChannels < 0) {
        throw InvalidArgument("invalid network architecture");
    }
}

template <class T>
ad::Var conv_relu(ad::Tape<T>& tape, ad::Var x, std::span<const ad::Var> w, std::size_t& k) {
    const ad::Var y = ad::conv2d(tape, x, w[k], w[k + 1]);
    k += 2;
    return ad::relu(tape, y);
}

}  // namespace

std::size_t NetParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.tensor.size();
    return n;
}

std::vector<NamedTensor> parameter_layout(const Architecture& arch) {
    check_arch(arch);
    std::vector<NamedTensor> out;
    const int features = arch.stemChannels > 0 ? arch.stemChannels : arch.inChannels;
    if (arch.stemChannels > 0) {
        add_conv(out, "stem.conv1", arch.inChannels, arch.stemChannels, 1);
        add_conv(out, "stem.conv2", arch.stemChannels, arch.stemChannels, 1);
    }
    for (int l = 0; l <= arch.levels; ++l) {
        const int in = l == 0 ? features : channels_at(arch, l - 1);
        const std::string p = "enc" + std::to_string(l);
        add_conv(out, p + ".conv1", in, channels_at(arch, l));
        add_conv(out, p + ".conv2", channels_at(arch, l), channels_at(arch, l));
    }
    for (int l = arch.levels - 1; l >= 0; --l) {
        const std::string p = "dec" + std::to_string(l);
        add_conv(out, p + ".up", channels_at(arch, l + 1), channels_at(arch, l));
        const int extra = l == 0 ? features : 0;
        add_conv(out, p + ".fuse", 2 * channels_at(arch, l) + extra, channels_at(arch, l));
    }
    if (arch.headChannels > 0) {
        add_conv(out, "head.hidden", arch.baseChannels, arch.headChannels, 1);
        add_conv(out, "head", arch.headChannels, arch.outChannels, 1);
    } else {
        add_conv(out, "head", arch.baseChannels, arch.outChannels);
    }
    return out;
}

NetParams init_params(const Architecture& arch, std::uint64_t seed) {
    NetParams params{arch, parameter_layout(arch)};
    CounterRng rng(seed, Stream::Init);
    const double headBias = std::log(std::expm1(kHeadBiasTarget));
    for (auto& nt : params.tensors) {
        auto& t = nt.tensor;
        const bool head = nt.name == "head.weight" || nt.name == "head.bias";
        if (t.rank() == 4) {
            const double fanIn = static_cast<double>(t.dim(1)) * t.dim(2) * t.dim(3);
            const double stddev = std::sqrt(2.0 / fanIn) * (head ? kHeadScale : 1.0);
            for (auto& v : t.data) v = static_cast<float>(stddev * rng.normal());
        } else if (head) {
            std::fill(t.data.begin(), t.data.end(), static_cast<float>(headBias));
        }
    }
    return params;
}

void validate_params(const NetParams& params) {
    const auto layout = parameter_layout(params.arch);
    if (layout.size() != params.tensors.size()) throw InvalidArgument("parameter count does not match architecture");
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& got = params.tensors[i];
        if (got.name != layout[i].name || got.tensor.shape != layout[i].tensor.shape ||
            got.tensor.data.size() != ad::shape_size(got.tensor.shape)) {
            throw InvalidArgument("parameter '" + layout[i].name + "' does not match architecture");
        }
    }
}

InputField assemble_input(const GBuffer& g, const MaterialMaps& m, const LightMaps& l) {
    const int h = g.height, w = g.width;
    if (!m.A.same_shape(h, w) || !m.R.same_shape(h, w) || !m.S.same_shape(h, w) || !l.Ldir.same_shape(h, w) ||
        !l.Ldist.same_shape(h, w) || !g.X.same_shape(h, w)) {
        throw InvalidArgument("assemble_input: resolution mismatch");
    }
    InputField out({kInputChannels, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < plane; ++p) {
        if (!g.valid.pixel(p)[0]) continue;
        float v[kInputChannels];
        for (int c = 0; c < 3; ++c) {
            v[c] = static_cast<float>(g.X.pixel(p)[c] / kNormRadius);
            v[3 + c] = g.N.pixel(p)[c];
            v[6 + c] = m.A.pixel(p)[c];
            v[11 + c] = l.Ldir.pixel(p)[c];
        }
        v[9] = m.S.pixel(p)[0];
        v[10] = m.R.pixel(p)[0];
        v[14] = static_cast<float>(l.Ldist.pixel(p)[0] / kNormRadius);
        for (int c = 0; c < kInputChannels; ++c) out.data[c * plane + p] = v[c];
    }
    return out;
}

OutputField pack_buffers(const LightBuffers& b) {
    const int h = b.height(), w = b.width();
    OutputField out({kOutputChannels, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const ImageF* groups[kBufferGroups] = {&b.Ddir, &b.Dind, &b.Gdir, &b.Gind};
    for (int gi = 0; gi < kBufferGroups; ++gi) {
        if (!groups[gi]->same_shape(h, w) || groups[gi]->channels() != 3) {
            throw InvalidArgument("light buffers have inconsistent shapes");
        }
        for (std::size_t p = 0; p < plane; ++p) {
            for (int c = 0; c < 3; ++c) out.data[(3 * gi + c) * plane + p] = groups[gi]->pixel(p)[c];
        }
    }
    return out;
}

LightBuffers split_output(const OutputField& o) {
    if (o.rank() != 3 || o.dim(0) != kOutputChannels) throw InvalidArgument("split_output: expected [12,H,W]");
    const int h = o.dim(1), w = o.dim(2);
    LightBuffers b(h, w);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    ImageF* groups[kBufferGroups] = {&b.Ddir, &b.Dind, &b.Gdir, &b.Gind};
    for (int gi = 0; gi < kBufferGroups; ++gi) {
        for (std::size_t p = 0; p < plane; ++p) {
            for (int c = 0; c < 3; ++c) groups[gi]->pixel(p)[c] = o.data[(3 * gi + c) * plane + p];
        }
    }
    return b;
}

template <class T>
ad::Var build_rendernet(ad::Tape<T>& tape, const Architecture& arch, std::span<const ad::Var> w, ad::Var input) {
    check_arch(arch);
    const auto& x = tape.value(input);
    if (x.rank() != 3 || x.dim(0) != arch.inChannels) throw InvalidArgument("network input has wrong channel count");
    const int div = 1 << arch.levels;
    if (x.dim(1) % div || x.dim(2) % div || x.dim(1) == 0 || x.dim(2) == 0) {
        throw BadResolution("input resolution " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(1)) +
                            " is not divisible by " + std::to_string(div));
    }
    if (w.size() != parameter_layout(arch).size()) throw InvalidArgument("parameter count does not match architecture");
    std::size_t k = 0;
    std::vector<ad::Var> skips;
    ad::Var features = input;
    if (arch.stemChannels > 0) {
        features = conv_relu(tape, features, w, k);
        features = conv_relu(tape, features, w, k);
    }
    ad::Var cur = features;
    for (int l = 0; l <= arch.levels; ++l) {
        if (l > 0) cur = ad::avg_pool2(tape, cur);
        cur = conv_relu(tape, cur, w, k);
        cur = conv_relu(tape, cur, w, k);
        skips.push_back(cur);
    }
    for (int l = arch.levels - 1; l >= 0; --l) {
        cur = ad::upsample_bilinear2(tape, cur);
        cur = conv_relu(tape, cur, w, k);
        const ad::Var parts[3] = {cur, skips[l], features};
        cur = ad::concat(tape, std::span<const ad::Var>(parts, l == 0 ? 3 : 2));
        cur = conv_relu(tape, cur, w, k);
    }
    if (arch.headChannels > 0) cur = conv_relu(tape, cur, w, k);
    const ad::Var head = ad::conv2d(tape, cur, w[k], w[k + 1]);
    return ad::softplus(tape, head);
}

template ad::Var build_rendernet(ad::Tape<float>&, const Architecture&, std::span<const ad::Var>, ad::Var);
template ad::Var build_rendernet(ad::Tape<double>&, const Architecture&, std::span<const ad::Var>, ad::Var);

OutputField forward(const NetParams& params, const InputField& input) {
    validate_params(params);
    ad::Tape<float> tape;
    std::vector<ad::Var> w;
    w.reserve(params.tensors.size());
    for (const auto& t : params.tensors) w.push_back(tape.constant(t.tensor));
    const ad::Var x = tape.constant(input);
    const ad::Var y = build_rendernet(tape, params.arch, w, x);
    return tape.value(y);
}

double l1_loss(const OutputField& pred, const LightBuffers& gt, const Mask& valid) {
    const OutputField target = pack_buffers(gt);
    if (pred.shape != target.shape || !valid.same_shape(gt.height(), gt.width())) {
        throw InvalidArgument("l1_loss: shape mismatch");
    }
    const std::size_t plane = valid.pixel_count();
    std::size_t count = 0;
    for (std::size_t p = 0; p < plane; ++p) count += valid.pixel(p)[0] ? 1 : 0;
    if (count == 0) return 0.0;
    double total = 0;
    for (int c = 0; c < kOutputChannels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            if (valid.pixel(p)[0]) total += std::abs(static_cast<double>(pred.data[c * plane + p]) - target.data[c * plane + p]);
        }
    }
    return kBufferGroups * total / (static_cast<double>(count) * kOutputChannels);
}

namespace {

struct SampleGrad {
    double loss = 0;
    std::vector<ad::Tensor<float>> grads;
};

SampleGrad sample_gradient(const NetParams& params, const TrainSample& s) {
    ad::Tape<float> tape;
    std::vector<ad::Var> w;
    w.reserve(params.tensors.size());
    for (const auto& t : params.tensors) w.push_back(tape.parameter(t.tensor));
    const ad::Var x = tape.constant(s.input);
    const ad::Var y = build_rendernet(tape, params.arch, w, x);
    if (s.target.shape != tape.value(y).shape) throw InvalidArgument("training target does not match prediction");
    const ad::Var gt = tape.constant(s.target);
    const ad::Var loss = ad::masked_l1(tape, y, gt, s.valid.data(), static_cast<float>(kBufferGroups));
    tape.backward(loss);
    SampleGrad out;
    out.loss = tape.value(loss).data[0];
    out.grads.reserve(w.size());
    for (ad::Var v : w) out.grads.push_back(tape.grad(v));
    return out;
}

void check_sample(const TrainSample& s, const Architecture& arch) {
    if (s.input.rank() != 3 || s.input.dim(0) != arch.inChannels || s.target.rank() != 3 ||
        s.target.dim(0) != arch.outChannels || s.input.dim(1) != s.target.dim(1) ||
        s.input.dim(2) != s.target.dim(2) || !s.valid.same_shape(s.input.dim(1), s.input.dim(2))) {
        throw InvalidArgument("training sample has inconsistent resolutions");
    }
}

}  // namespace

Gradients backward(const NetParams& params, std::span<const TrainSample* const> batch) {
    validate_params(params);
    if (batch.empty()) throw InvalidArgument("backward: empty batch");
    for (const auto* s : batch) check_sample(*s, params.arch);
    std::vector<SampleGrad> per(batch.size());
    parallel_for(batch.size(), [&](std::size_t i) { per[i] = sample_gradient(params, *batch[i]); });
    Gradients out;
    out.tensors = std::move(per[0].grads);
    out.loss = per[0].loss;
    for (std::size_t i = 1; i < per.size(); ++i) {
        out.loss += per[i].loss;
        for (std::size_t t = 0; t < out.tensors.size(); ++t) {
            auto& dst = out.tensors[t].data;
            const auto& src = per[i].grads[t].data;
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }
    return out;
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.learningRate >= 0) || !std::isfinite(cfg.learningRate)) throw ConfigError("learningRate must be >= 0");
    if (cfg.batchSize < 1) throw ConfigError("batchSize must be >= 1");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1) || !(cfg.epsilon > 0)) {
        throw ConfigError("Adam hyperparameters out of range");
    }
}

TrainResult train(NetParams params, std::span<const TrainSample> samples, const TrainConfig& cfg,
                  const EpochCallback& onEpoch) {
    validate(cfg);
    validate_params(params);
    if (samples.empty()) throw InvalidArgument("training set is empty");
    for (const auto& s : samples) {
        check_sample(s, params.arch);
        if (s.input.shape != samples[0].input.shape) throw InvalidArgument("training samples differ in resolution");
    }

    std::vector<std::vector<double>> m(params.tensors.size()), v(params.tensors.size());
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        m[t].assign(params.tensors[t].tensor.size(), 0.0);
        v[t].assign(params.tensors[t].tensor.size(), 0.0);
    }

    TrainResult result;
    std::vector<std::size_t> order(samples.size());
    long step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        CounterRng rng(cfg.seed, Stream::Shuffle, static_cast<std::uint64_t>(epoch) << 32);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double epochTotal = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batchSize) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batchSize));
            std::vector<const TrainSample*> batch;
            for (std::size_t i = begin; i < end; ++i) batch.push_back(&samples[order[i]]);
            const Gradients g = backward(params, batch);
            if (!std::isfinite(g.loss)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
            epochTotal += g.loss;
            result.stepLoss.push_back(g.loss / batch.size());

            ++step;
            const double invBatch = 1.0 / static_cast<double>(batch.size());
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t t = 0; t < params.tensors.size(); ++t) {
                auto& p = params.tensors[t].tensor.data;
                const auto& gt = g.tensors[t].data;
                for (std::size_t j = 0; j < p.size(); ++j) {
                    const double gj = gt[j] * invBatch;
                    m[t][j] = cfg.beta1 * m[t][j] + (1 - cfg.beta1) * gj;
                    v[t][j] = cfg.beta2 * v[t][j] + (1 - cfg.beta2) * gj * gj;
                    const double update = cfg.learningRate * (m[t][j] / c1) / (std::sqrt(v[t][j] / c2) + cfg.epsilon);
                    p[j] = static_cast<float>(p[j] - update);
                }
            }
        }
        const double mean = epochTotal / static_cast<double>(samples.size());
        result.epochLoss.push_back(mean);
        if (onEpoch) onEpoch(epoch, mean, params);
    }
    result.params = std::move(params);
    return result;
}

LightBuffers predict_buffers(const NetParams& params, const GBuffer& gbuffer, const MaterialMaps& materials,
                             const LightMaps& lights) {
    LightBuffers b = split_output(forward(params, assemble_input(gbuffer, materials, lights)));
    const std::size_t plane = gbuffer.valid.pixel_count();
    for (ImageF* img : {&b.Ddir, &b.Dind, &b.Gdir, &b.Gind}) {
        for (std::size_t p = 0; p < plane; ++p) {
            if (!gbuffer.valid.pixel(p)[0]) std::fill_n(img->pixel(p), 3, 0.0f);
        }
    }
    return b;
}

LdrImage infer_render(const NetParams& params, const GBuffer& gbuffer, const MaterialMaps& materials,
                      const LightMaps& lights) {
    return render_ldr(predict_buffers(params, gbuffer, materials, lights), materials.A, materials.S);
}

}  // namespace pndr
