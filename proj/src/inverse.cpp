#include "pndr/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pndr/parallel.hpp"
#include "pndr/rng.hpp"

namespace pndr {

namespace {

constexpr int kMaterialOutputs = 5;

int index_of_scene(std::span<const std::int64_t> ids, std::int64_t sceneId) {
    const auto it = std::find(ids.begin(), ids.end(), sceneId);
    if (it == ids.end()) throw UnknownId("unknown scene id " + std::to_string(sceneId));
    return static_cast<int>(it - ids.begin());
}

int index_of_object(std::span<const int> ids, int objectId) {
    const auto it = std::find(ids.begin(), ids.end(), objectId);
    if (it == ids.end()) throw UnknownId("unknown object id " + std::to_string(objectId));
    return static_cast<int>(it - ids.begin());
}

void fill_uniform(ad::Tensor<float>& t, CounterRng& rng, double bound) {
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
}

template <class T>
std::vector<ad::Var> to_tape(ad::Tape<T>& tape, const std::vector<NamedTensor>& tensors, bool trainable) {
    std::vector<ad::Var> vars;
    vars.reserve(tensors.size());
    for (const auto& nt : tensors) {
        ad::Tensor<T> v(nt.tensor.shape);
        std::copy(nt.tensor.data.begin(), nt.tensor.data.end(), v.data.begin());
        vars.push_back(trainable ? tape.parameter(std::move(v)) : tape.constant(std::move(v)));
    }
    return vars;
}

std::vector<int> visible_instances(const GBuffer& g) {
    std::set<int> ids;
    for (auto v : g.instance.data()) {
        if (v >= 0) ids.insert(v);
    }
    return {ids.begin(), ids.end()};
}

Vec3 init_direction(int k, int n) {
    const double az = (k + 0.5) * 2.0 * kPi / n;
    const double el = kPi / 4.0;
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

}  // namespace

LightNetParams init_lightnet(const LightNetConfig& cfg, std::span<const std::int64_t> sceneIds, std::uint64_t seed,
                             const Vec3& initialDirection) {
    if (cfg.hidden < 1 || cfg.layers < 1 || cfg.embedDim < 1 || !(cfg.omega0 > 0)) {
        throw ConfigError("invalid LightNet configuration");
    }
    if (sceneIds.empty()) throw ConfigError("LightNet needs at least one scene id");
    LightNetParams p{cfg, {sceneIds.begin(), sceneIds.end()}, {}};
    CounterRng rng(seed, Stream::Init);
    const int n = static_cast<int>(sceneIds.size());
    p.tensors.push_back({"embed", ad::Tensor<float>({n, cfg.embedDim})});
    fill_uniform(p.tensors.back().tensor, rng, 1.0);
    int in = cfg.embedDim;
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string name = "l" + std::to_string(l);
        ad::Tensor<float> w({cfg.hidden, in}), b({cfg.hidden});
        const double bound = l == 0 ? 1.0 / in : std::sqrt(6.0 / in) / cfg.omega0;
        fill_uniform(w, rng, bound);
        fill_uniform(b, rng, bound);
        p.tensors.push_back({name + ".weight", std::move(w)});
        p.tensors.push_back({name + ".bias", std::move(b)});
        in = cfg.hidden;
    }
    ad::Tensor<float> w({3, in});
    fill_uniform(w, rng, 1e-3 * std::sqrt(6.0 / in) / cfg.omega0);
    const Vec3 d = normalize(initialDirection) * kLightRadius;
    p.tensors.push_back({"out.weight", std::move(w)});
    p.tensors.push_back({"out.bias", ad::Tensor<float>({3}, std::vector<float>{float(d.x), float(d.y), float(d.z)})});
    return p;
}

MaterialNetParams init_materialnet(const MaterialNetConfig& cfg, std::span<const int> objectIds,
                                   std::span<const std::int64_t> sceneIds, std::uint64_t seed) {
    if (cfg.hidden < 1 || cfg.layers < 1 || cfg.embedDim < 1) throw ConfigError("invalid MaterialNet configuration");
    if (objectIds.empty() || sceneIds.empty()) throw ConfigError("MaterialNet needs object and scene ids");
    MaterialNetParams p{cfg, {objectIds.begin(), objectIds.end()}, {sceneIds.begin(), sceneIds.end()}, {}};
    CounterRng rng(seed, Stream::Init);
    p.tensors.push_back({"object_embed", ad::Tensor<float>({static_cast<int>(objectIds.size()), cfg.embedDim})});
    fill_uniform(p.tensors.back().tensor, rng, 1.0);
    p.tensors.push_back({"scene_embed", ad::Tensor<float>({static_cast<int>(sceneIds.size()), cfg.embedDim})});
    fill_uniform(p.tensors.back().tensor, rng, 1.0);
    int in = 2 * cfg.embedDim;
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string name = "l" + std::to_string(l);
        ad::Tensor<float> w({cfg.hidden, in});
        fill_uniform(w, rng, std::sqrt(6.0 / in));
        p.tensors.push_back({name + ".weight", std::move(w)});
        p.tensors.push_back({name + ".bias", ad::Tensor<float>({cfg.hidden})});
        in = cfg.hidden;
    }
    p.tensors.push_back({"out.weight", ad::Tensor<float>({kMaterialOutputs, in})});
    p.tensors.push_back({"out.bias", ad::Tensor<float>({kMaterialOutputs})});
    return p;
}

template <class T>
ad::Var lightnet_raw(ad::Tape<T>& tape, const LightNetParams& p, std::span<const ad::Var> w, std::int64_t sceneId) {
    const int row = index_of_scene(p.sceneIds, sceneId);
    if (w.size() != 2 * static_cast<std::size_t>(p.cfg.layers) + 3) throw InvalidArgument("LightNet weight count mismatch");
    ad::Var h = ad::row(tape, w[0], row);
    std::size_t k = 1;
    for (int l = 0; l < p.cfg.layers; ++l, k += 2) {
        h = ad::sine(tape, ad::linear(tape, h, w[k], w[k + 1]), static_cast<T>(p.cfg.omega0));
    }
    return ad::linear(tape, h, w[k], w[k + 1]);
}

template <class T>
ad::Var materialnet_output(ad::Tape<T>& tape, const MaterialNetParams& p, std::span<const ad::Var> w, int objectId,
                           std::int64_t sceneId) {
    const int orow = index_of_object(p.objectIds, objectId);
    const int srow = index_of_scene(p.sceneIds, sceneId);
    if (w.size() != 2 * static_cast<std::size_t>(p.cfg.layers) + 4) {
        throw InvalidArgument("MaterialNet weight count mismatch");
    }
    const ad::Var parts[2] = {ad::row(tape, w[0], orow), ad::row(tape, w[1], srow)};
    ad::Var h = ad::concat(tape, std::span<const ad::Var>(parts));
    std::size_t k = 2;
    for (int l = 0; l < p.cfg.layers; ++l, k += 2) h = ad::relu(tape, ad::linear(tape, h, w[k], w[k + 1]));
    const ad::Var s = ad::sigmoid(tape, ad::linear(tape, h, w[k], w[k + 1]));
    // Roughness is squashed into [Rmin, 1]; the other outputs keep [0, 1].
    ad::Tensor<T> scaleT({kMaterialOutputs}, T(1)), offsetT({kMaterialOutputs}, T(0));
    scaleT.data[3] = static_cast<T>(1.0 - kMinRoughness);
    offsetT.data[3] = static_cast<T>(kMinRoughness);
    const ad::Var scaled = ad::mul(tape, s, tape.constant(std::move(scaleT)));
    return ad::add(tape, scaled, tape.constant(std::move(offsetT)));
}

template ad::Var lightnet_raw(ad::Tape<float>&, const LightNetParams&, std::span<const ad::Var>, std::int64_t);
template ad::Var lightnet_raw(ad::Tape<double>&, const LightNetParams&, std::span<const ad::Var>, std::int64_t);
template ad::Var materialnet_output(ad::Tape<float>&, const MaterialNetParams&, std::span<const ad::Var>, int,
                                   std::int64_t);
template ad::Var materialnet_output(ad::Tape<double>&, const MaterialNetParams&, std::span<const ad::Var>, int,
                                   std::int64_t);

// Single precision, so results match the optimized graph bit for bit.
LightSample lightnet_forward(const LightNetParams& p, std::int64_t sceneId, const Pose& worldToCamera) {
    ad::Tape<float> tape;
    const auto w = to_tape(tape, p.tensors, false);
    const ad::Var pos =
        ad::hemisphere_point(tape, lightnet_raw(tape, p, w, sceneId), static_cast<float>(kLightRadius));
    const auto& v = tape.value(pos).data;
    return light_at({v[0], v[1], v[2]}, worldToCamera);
}

MaterialSample materialnet_forward(const MaterialNetParams& p, int objectId, std::int64_t sceneId) {
    ad::Tape<float> tape;
    const auto w = to_tape(tape, p.tensors, false);
    const auto& v = tape.value(materialnet_output(tape, p, w, objectId, sceneId)).data;
    return {objectId, {v[0], v[1], v[2]}, std::clamp(static_cast<double>(v[3]), kMinRoughness, 1.0), v[4]};
}

// ---------------------------------------------------------------------------

namespace {

/// Per-pixel constants of the differentiable renderer.
struct SceneConstants {
    int height = 0, width = 0;
    ad::Tensor<float> X, Xn, N;
    std::vector<int> row;  // instance table row per pixel, -1 when invalid
    std::vector<float> baseAlbedo;
    std::vector<std::uint8_t> mask;
    std::vector<int> instanceIds;
};

SceneConstants scene_constants(const GBuffer& g) {
    SceneConstants c;
    c.height = g.height;
    c.width = g.width;
    const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
    c.X = ad::Tensor<float>({3, g.height, g.width});
    c.Xn = c.X;
    c.N = c.X;
    c.row.assign(plane, -1);
    c.baseAlbedo.assign(plane, 0.0f);
    c.mask.assign(plane, 0);
    c.instanceIds = visible_instances(g);
    if (c.instanceIds.empty()) throw InvalidArgument("G-buffer has no valid pixels");
    for (std::size_t p = 0; p < plane; ++p) {
        if (!g.valid.pixel(p)[0]) continue;
        c.mask[p] = 1;
        for (int k = 0; k < 3; ++k) {
            c.X.data[k * plane + p] = g.X.pixel(p)[k];
            c.Xn.data[k * plane + p] = static_cast<float>(g.X.pixel(p)[k] / kNormRadius);
            c.N.data[k * plane + p] = g.N.pixel(p)[k];
        }
        c.row[p] = index_of_object(c.instanceIds, g.instance.pixel(p)[0]);
        c.baseAlbedo[p] = g.baseAlbedo.pixel(p)[0];
    }
    return c;
}

/// Tables [n, 3] (albedo RGB) and [n, 2] (specularity, roughness) from fixed materials.
std::pair<ad::Tensor<float>, ad::Tensor<float>> material_tables(std::span<const int> ids,
                                                                std::span<const MaterialSample> materials) {
    const int n = static_cast<int>(ids.size());
    ad::Tensor<float> a({n, 3}), sr({n, 2});
    for (int i = 0; i < n; ++i) {
        const MaterialSample& m = find_material(materials, ids[i]);
        for (int k = 0; k < 3; ++k) a.data[3 * i + k] = static_cast<float>(m.albedoRgb[k]);
        sr.data[2 * i] = static_cast<float>(m.specularity);
        sr.data[2 * i + 1] = static_cast<float>(m.roughness);
    }
    return {a, sr};
}

/// Records input assembly, the frozen network, compositing and tone mapping; returns LDR [3, H, W].
ad::Var render_graph(ad::Tape<float>& tape, const NetParams& net, const SceneConstants& c, ad::Var lightCamera,
                     ad::Var albedoTable, ad::Var srTable) {
    const ad::Var xn = tape.constant(c.Xn);
    const ad::Var n = tape.constant(c.N);
    const ad::Var a = ad::gather_instances(tape, albedoTable, std::span<const int>(c.row),
                                           std::span<const float>(c.baseAlbedo), c.height, c.width);
    const ad::Var sr = ad::gather_instances(tape, srTable, std::span<const int>(c.row), std::span<const float>(),
                                            c.height, c.width);
    const ad::Var lf = ad::light_field(tape, lightCamera, c.X, c.mask, static_cast<float>(kNormRadius));
    const ad::Var parts[5] = {xn, n, a, sr, lf};
    const ad::Var input = ad::concat(tape, std::span<const ad::Var>(parts));
    std::vector<ad::Var> w;
    w.reserve(net.tensors.size());
    for (const auto& t : net.tensors) w.push_back(tape.constant(t.tensor));
    const ad::Var out = build_rendernet(tape, net.arch, w, input);
    const ad::Var diffuse = ad::add(tape, ad::slice(tape, out, 0, 3), ad::slice(tape, out, 3, 3));
    const ad::Var glossy = ad::add(tape, ad::slice(tape, out, 6, 3), ad::slice(tape, out, 9, 3));
    const ad::Var spec = ad::broadcast_channels(tape, ad::slice(tape, sr, 0, 1), 3);
    const ad::Var hdr = ad::add(tape, ad::mul(tape, diffuse, a), ad::mul(tape, glossy, spec));
    return ad::tone_map(tape, hdr);
}

ad::Tensor<float> to_chw(const ImageF& img) {
    const std::size_t plane = img.pixel_count();
    ad::Tensor<float> t({img.channels(), img.height(), img.width()});
    for (std::size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < img.channels(); ++c) t.data[c * plane + p] = img.pixel(p)[c];
    }
    return t;
}

ImageF from_chw(const ad::Tensor<float>& t) {
    ImageF img(t.dim(1), t.dim(2), t.dim(0));
    const std::size_t plane = img.pixel_count();
    for (std::size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < img.channels(); ++c) img.pixel(p)[c] = t.data[c * plane + p];
    }
    return img;
}

ad::Tensor<float> vec_tensor(const Vec3& v) {
    return ad::Tensor<float>({3}, std::vector<float>{float(v.x), float(v.y), float(v.z)});
}

struct Adam {
    std::vector<std::vector<double>> m, v;
    long step = 0;

    void init(const std::vector<NamedTensor>& t) {
        for (const auto& nt : t) {
            m.emplace_back(nt.tensor.size(), 0.0);
            v.emplace_back(nt.tensor.size(), 0.0);
        }
    }

    void update(std::vector<NamedTensor>& params, const std::vector<ad::Tensor<float>>& grads, double lr) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++step;
        const double c1 = 1 - std::pow(b1, double(step)), c2 = 1 - std::pow(b2, double(step));
        for (std::size_t t = 0; t < params.size(); ++t) {
            auto& p = params[t].tensor.data;
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double g = grads[t].data[j];
                m[t][j] = b1 * m[t][j] + (1 - b1) * g;
                v[t][j] = b2 * v[t][j] + (1 - b2) * g * g;
                p[j] = static_cast<float>(p[j] - lr * (m[t][j] / c1) / (std::sqrt(v[t][j] / c2) + eps));
            }
        }
    }
};

struct Problem {
    const NetParams& net;
    const SceneConstants& c;
    const InverseScene& scene;
    ad::Tensor<float> target;
    bool fitLight = false, fitMaterial = false;
    ad::Tensor<float> fixedLight;
    ad::Tensor<float> fixedAlbedo, fixedSr;
};

struct Run {
    int init = 0;
    LightNetParams light;
    MaterialNetParams material;
    Adam lightAdam, materialAdam;
    std::vector<double> history;
    double bestLoss = INFINITY;
    int sinceImprovement = 0;
    bool stopped = false;
    // Parameters with the lowest loss seen so far.
    double keptLoss = INFINITY;
    std::vector<NamedTensor> keptLight, keptMaterial;

    void keep(double loss) {
        keptLoss = loss;
        keptLight = light.tensors;
        keptMaterial = material.tensors;
    }
    void restore() {
        light.tensors = keptLight;
        material.tensors = keptMaterial;
    }
};

/// Loss at the current parameters; accumulates gradients when `update` is set and applies one Adam step.
double step(const Problem& pr, Run& run, double lr, bool update) {
    ad::Tape<float> tape;
    std::vector<ad::Var> lw, mw;
    ad::Var lightCam;
    if (pr.fitLight) {
        lw = to_tape(tape, run.light.tensors, update);
        const ad::Var pos = ad::hemisphere_point(tape, lightnet_raw(tape, run.light, lw, pr.scene.sceneId),
                                                 static_cast<float>(kLightRadius));
        lightCam = ad::rigid_transform(tape, pos, pr.scene.worldToCamera);
    } else {
        lightCam = tape.constant(pr.fixedLight);
    }
    ad::Var albedo, sr;
    if (pr.fitMaterial) {
        mw = to_tape(tape, run.material.tensors, update);
        std::vector<ad::Var> aParts, srParts;
        for (int id : pr.c.instanceIds) {
            const ad::Var o = materialnet_output(tape, run.material, mw, id, pr.scene.sceneId);
            aParts.push_back(ad::slice(tape, o, 0, 3));
            srParts.push_back(ad::slice(tape, o, 4, 1));
            srParts.push_back(ad::slice(tape, o, 3, 1));
        }
        const int n = static_cast<int>(pr.c.instanceIds.size());
        albedo = ad::reshape(tape, ad::concat(tape, std::span<const ad::Var>(aParts)), {n, 3});
        sr = ad::reshape(tape, ad::concat(tape, std::span<const ad::Var>(srParts)), {n, 2});
    } else {
        albedo = tape.constant(pr.fixedAlbedo);
        sr = tape.constant(pr.fixedSr);
    }
    const ad::Var ldr = render_graph(tape, pr.net, pr.c, lightCam, albedo, sr);
    const ad::Var loss = ad::masked_l1(tape, ldr, tape.constant(pr.target), pr.c.mask, 1.0f);
    const double value = tape.value(loss).data[0];
    if (!std::isfinite(value)) {
        throw NumericError("recovery diverged: init " + std::to_string(run.init) + " produced a non-finite loss at step " +
                           std::to_string(run.history.size()));
    }
    if (!update) return value;
    if (value < run.keptLoss) run.keep(value);
    tape.backward(loss);
    if (pr.fitLight) {
        std::vector<ad::Tensor<float>> g;
        for (ad::Var v : lw) g.push_back(tape.grad(v));
        run.lightAdam.update(run.light.tensors, g, lr);
    }
    if (pr.fitMaterial) {
        std::vector<ad::Tensor<float>> g;
        for (ad::Var v : mw) g.push_back(tape.grad(v));
        run.materialAdam.update(run.material.tensors, g, lr);
    }
    return value;
}

void advance(const Problem& pr, Run& run, int untilStep, const RecoverConfig& cfg) {
    while (!run.stopped && static_cast<int>(run.history.size()) < untilStep) {
        const double loss = step(pr, run, cfg.learningRate, true);
        run.history.push_back(loss);
        if (loss < run.bestLoss - cfg.tolerance) {
            run.bestLoss = loss;
            run.sinceImprovement = 0;
        } else if (cfg.patience > 0 && ++run.sinceImprovement >= cfg.patience) {
            run.stopped = true;
        }
        if (loss == 0) run.stopped = true;
    }
}

}  // namespace

void validate(const RecoverConfig& cfg) {
    if (cfg.steps < 0) throw ConfigError("steps must be >= 0");
    if (!(cfg.learningRate >= 0) || !std::isfinite(cfg.learningRate)) throw ConfigError("learningRate must be >= 0");
    if (cfg.nInits < 1) throw ConfigError("nInits must be >= 1");
    if (cfg.screenSteps < 0 || cfg.keepInits < 1) throw ConfigError("screenSteps must be >= 0 and keepInits >= 1");
    if (cfg.patience < 0 || !(cfg.tolerance >= 0)) throw ConfigError("patience and tolerance must be >= 0");
}

LdrImage render_scene(const NetParams& net, const InverseScene& scene, const LightSample& light,
                      std::span<const MaterialSample> materials) {
    const SceneConstants c = scene_constants(scene.gbuffer);
    auto [a, sr] = material_tables(c.instanceIds, materials);
    ad::Tape<float> tape;
    const ad::Var ldr = render_graph(tape, net, c, tape.constant(vec_tensor(light.positionCamera)),
                                     tape.constant(std::move(a)), tape.constant(std::move(sr)));
    return from_chw(tape.value(ldr));
}

double photometric_loss(const LdrImage& a, const LdrImage& b, const Mask& valid) {
    if (!a.same_extent(b) || a.channels() != b.channels() || !valid.same_extent(a)) {
        throw InvalidArgument("photometric_loss: shape mismatch");
    }
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        if (!valid.pixel(p)[0]) continue;
        for (int k = 0; k < a.channels(); ++k) sum += std::abs(double(a.pixel(p)[k]) - b.pixel(p)[k]);
        n += a.channels();
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

RecoverResult recover_scene(const NetParams& net, const LdrImage& target, const InverseScene& scene, RecoverMode mode,
                            const RecoverConfig& cfg) {
    validate(cfg);
    validate_params(net);
    const GBuffer& g = scene.gbuffer;
    if (!target.same_shape(g.height, g.width) || target.channels() != 3) {
        throw InvalidArgument("target image does not match the G-buffer resolution");
    }
    const SceneConstants c = scene_constants(g);
    Problem pr{net, c, scene, to_chw(target), false, false, {}, {}, {}};
    pr.fitLight = mode != RecoverMode::Material;
    pr.fitMaterial = mode != RecoverMode::Light;
    if (!pr.fitLight) {
        if (!cfg.knownLight) throw ConfigError("material recovery needs the known light");
        pr.fixedLight = vec_tensor(cfg.knownLight->positionCamera);
    }
    if (!pr.fitMaterial) {
        auto [a, sr] = material_tables(c.instanceIds, cfg.knownMaterials);
        pr.fixedAlbedo = std::move(a);
        pr.fixedSr = std::move(sr);
    }

    const std::int64_t sceneIds[1] = {scene.sceneId};
    const int inits = pr.fitLight ? cfg.nInits : 1;
    std::vector<Run> runs(static_cast<std::size_t>(inits));
    for (int k = 0; k < inits; ++k) {
        Run& r = runs[k];
        r.init = k;
        const std::uint64_t seed = hash_counter(cfg.seed, static_cast<std::uint64_t>(Stream::Init), k);
        r.light = init_lightnet(cfg.light, sceneIds, seed, init_direction(k, inits));
        r.material = init_materialnet(cfg.material, c.instanceIds, sceneIds, seed ^ 0x9e3779b97f4a7c15ULL);
        r.lightAdam.init(r.light.tensors);
        r.materialAdam.init(r.material.tensors);
    }

    auto run_all = [&](std::vector<Run*>& active, int until) {
        parallel_for(active.size(), [&](std::size_t i) { advance(pr, *active[i], until, cfg); });
    };
    std::vector<Run*> active;
    for (auto& r : runs) active.push_back(&r);
    if (inits > cfg.keepInits && cfg.screenSteps < cfg.steps) {
        run_all(active, cfg.screenSteps);
        std::vector<double> current(runs.size());
        for (auto& r : runs) current[r.init] = r.keptLoss;
        std::stable_sort(active.begin(), active.end(),
                         [&](const Run* a, const Run* b) { return current[a->init] < current[b->init]; });
        active.resize(static_cast<std::size_t>(cfg.keepInits));
    }
    run_all(active, cfg.steps);

    std::vector<double> finalLoss(active.size());
    parallel_for(active.size(), [&](std::size_t i) {
        Run& r = *active[i];
        const double last = step(pr, r, 0.0, false);
        if (last < r.keptLoss) r.keep(last);
        r.restore();
        finalLoss[i] = r.keptLoss;
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < active.size(); ++i) {
        if (finalLoss[i] < finalLoss[best] || (finalLoss[i] == finalLoss[best] && active[i]->init < active[best]->init)) {
            best = i;
        }
    }
    Run& win = *active[best];

    RecoverResult res;
    res.loss = finalLoss[best];
    res.bestInit = win.init;
    res.lossHistory = win.history;
    res.initialLoss = win.history.empty() ? res.loss : win.history.front();
    res.light = pr.fitLight ? lightnet_forward(win.light, scene.sceneId, scene.worldToCamera) : *cfg.knownLight;
    if (pr.fitMaterial) {
        for (int id : c.instanceIds) res.materials.push_back(materialnet_forward(win.material, id, scene.sceneId));
    } else {
        for (int id : c.instanceIds) res.materials.push_back(find_material(cfg.knownMaterials, id));
    }
    res.lightNet = std::move(win.light);
    res.materialNet = std::move(win.material);
    return res;
}

double light_angle_deg(const Vec3& a, const Vec3& b) {
    return std::atan2(length(cross(a, b)), dot(a, b)) * 180.0 / kPi;
}

}  // namespace pndr
