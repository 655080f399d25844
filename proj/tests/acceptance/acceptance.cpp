// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments pick a
// subset of criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pndr/compose.hpp"
#include "pndr/dataio.hpp"
#include "pndr/inverse.hpp"
#include "pndr/metrics.hpp"
#include "pndr/oracle.hpp"
#include "pndr/parallel.hpp"
#include "pndr/pipeline.hpp"
#include "pndr/rendernet.hpp"
#include "pndr/rng.hpp"

using namespace pndr;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

/// Collects failed expectations and measured values for one criterion.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
    }
    void note(const std::string& what) { notes_.push_back(what); }
    bool passed() const { return failures_.empty(); }
    std::string summary() const {
        std::string s;
        for (const auto& n : notes_) s += (s.empty() ? "" : "; ") + n;
        for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + ("failed: " + f);
        return s;
    }

private:
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

Vec3 from_spherical(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

std::vector<Mesh> set_a_meshes() { return mesh_library(MeshSet::A); }

SceneGraph small_scene(std::uint64_t seed, int count, int size) {
    PlacementOptions opts;
    opts.floorExtent = 0.7;
    opts.width = size;
    opts.height = size;
    return place_objects(set_a_meshes(), Room{}, count, seed, opts);
}

// 1 ---------------------------------------------------------------------------

void formula_goldens(Check& c) {
    c.expect(tone_curve(0.0) == 0.0, "tone f(0) = 0");
    c.expect(tone_curve(0.004) == 0.0, "tone f(0.004) = 0");
    c.expect(std::abs(tone_curve(1.0) - 0.8412) <= 1e-4, "tone f(1) = 0.8412");
    c.note("f(1) = " + fmt("%.6f", tone_curve(1.0)));

    LightBuffers b(2, 2);
    for (float& v : b.Ddir.data()) v = 0.2f;
    for (float& v : b.Dind.data()) v = 0.1f;
    for (float& v : b.Gdir.data()) v = 0.5f;
    for (float& v : b.Gind.data()) v = 0.25f;
    ImageF A(2, 2, 3), S(2, 2, 1, 0.4f);
    for (std::size_t p = 0; p < A.pixel_count(); ++p) A.pixel(p)[0] = 0.5f;
    HdrImage hdr = composite_hdr(b, A, specular_color(S));
    for (std::size_t p = 0; p < hdr.pixel_count(); ++p) {
        c.expect(std::abs(hdr.pixel(p)[0] - 0.45) < 1e-6, "composite red = 0.5*0.3 + 0.4*0.75");
        c.expect(std::abs(hdr.pixel(p)[1] - 0.30) < 1e-6, "composite green = 0.4*0.75");
    }

    Mesh cube = make_primitive(PrimitiveKind::Cube, {1.0, 0});
    Pose gt, shifted{Mat3::identity(), {0.01, 0, 0}};
    c.expect(std::abs(add(cube.vertices, gt, shifted) - 0.010) < 1e-12, "ADD translation 0.010 m");
    std::vector<double> one = {0.12 * 0.2};
    c.expect(std::abs(add_auc(one, 0.2) - 0.8) < 1e-12, "add_auc single sample 0.8");

    ImageF depth(4, 4, 1), d12(4, 4, 1), d13(4, 4, 1);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        depth.data()[i] = 1.0f + 0.1f * static_cast<float>(i);
        d12.data()[i] = depth.data()[i] * 1.2f;
        d13.data()[i] = depth.data()[i] * 1.3f;
    }
    Mask valid(4, 4, 1, 1);
    c.expect(depth_metrics(d12, depth, valid).delta1 == 1.0, "delta1 at ratio 1.2 is 1");
    c.expect(depth_metrics(d13, depth, valid).delta1 == 0.0, "delta1 at ratio 1.3 is 0");
}

// 2 ---------------------------------------------------------------------------

double ggx_d_reference(double nDotH, double alpha) {
    const double a2 = alpha * alpha;
    const double t = nDotH * nDotH * (a2 - 1.0) + 1.0;
    return a2 / (kPi * t * t);
}

void bsdf_physics(Check& c) {
    const double albedo = 0.8;
    const Vec3 n{0, 0, 1}, view = from_spherical(0.6, 0.0);
    CounterRng rng(5, 5);
    const int samples = 100000;
    double sum = 0;
    for (int i = 0; i < samples; ++i) {
        const double z = rng.uniform(), phi = 2 * kPi * rng.uniform();
        const Vec3 wi = from_spherical(std::acos(z), phi);
        sum += albedo * oren_nayar_factor(wi.z, dot(n, view), phi, 0.0) * kInvPi * wi.z * 2 * kPi;
    }
    const double furnace = sum / samples;
    c.note("white furnace " + fmt("%.4f", furnace) + " for albedo 0.8");
    c.expect(std::abs(furnace - albedo) <= 0.01 * albedo, "white furnace within 1%");

    CounterRng r2(6, 6);
    bool onIsLambert = true;
    for (int i = 0; i < 10000; ++i) {
        const double f = oren_nayar_factor(r2.uniform(), r2.uniform(), r2.uniform(-kPi, kPi), 0.0);
        onIsLambert = onIsLambert && f == 1.0;
    }
    c.expect(onIsLambert, "Oren-Nayar factor at sigma 0 is 1");
    SceneGraph scene = small_scene(1, 3, 32);
    Bvh bvh = build_bvh(scene);
    GBuffer g = raycast_gbuffer(scene, bvh, 32, 32);
    auto mats = sample_materials(scene.instance_ids(), 3);
    MaterialMaps maps = compose_material_maps(g, mats);
    std::fill(maps.R.storage().begin(), maps.R.storage().end(), 0.0f);
    LightSample light = sample_light(3, scene.worldToCamera);
    LightMaps lm = light_maps(g, light);
    ShadeConfig on, lambert;
    lambert.diffuseModel = DiffuseModel::Lambertian;
    DirectBuffers a = shade_direct(g, maps, lm, light, bvh, scene.worldToCamera, on);
    DirectBuffers l = shade_direct(g, maps, lm, light, bvh, scene.worldToCamera, lambert);
    c.expect(a.Ddir == l.Ddir && a.Gdir == l.Gdir, "Oren-Nayar image at sigma 0 equals Lambertian image");

    double worstRecip = 0;
    CounterRng r3(2, 2);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 wi = from_spherical(r3.uniform(0, 1.5), r3.uniform(0, 2 * kPi));
        const Vec3 wo = from_spherical(r3.uniform(0, 1.5), r3.uniform(0, 2 * kPi));
        const double alpha = r3.uniform(0.0025, 1.0);
        const double x = ggx_specular(n, wi, wo, alpha), y = ggx_specular(n, wo, wi, alpha);
        worstRecip = std::max(worstRecip, std::abs(x - y) / std::max(1.0, std::abs(x)));
    }
    c.note("GGX reciprocity error " + fmt("%.2e", worstRecip));
    c.expect(worstRecip <= 1e-9, "GGX reciprocity");

    double worstEnergy = 0;
    for (double alpha : {0.1, 0.3, 0.8}) {
        for (double thetaO : {0.0, 0.5, 1.0, 1.3}) {
            const Vec3 wo = from_spherical(thetaO, 0.3);
            CounterRng r4(7, 3);
            double e = 0;
            for (int i = 0; i < samples; ++i) {
                const double u1 = r4.uniform(), u2 = r4.uniform();
                const double ct = 1 / std::sqrt(1 + alpha * alpha * u1 / (1 - u1));
                const Vec3 h = from_spherical(std::acos(ct), 2 * kPi * u2);
                const double oh = dot(wo, h);
                if (oh <= 0) continue;
                const Vec3 wi = h * (2 * oh) - wo;
                if (wi.z <= 0) continue;
                e += ggx_specular(n, wi, wo, alpha) * wi.z / (ggx_d_reference(ct, alpha) * ct / (4 * oh));
            }
            worstEnergy = std::max(worstEnergy, e / samples);
        }
    }
    c.note("max GGX albedo " + fmt("%.4f", worstEnergy));
    c.expect(worstEnergy <= 1.02, "GGX hemispherical energy <= 1.02");
}

// 3 ---------------------------------------------------------------------------

void geometry_consistency(Check& c) {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SceneGraph s = small_scene(seed, 3, 32);
        GBuffer g = raycast_gbuffer(s, build_bvh(s), 32, 32);
        LightSample light = sample_light(seed, s.worldToCamera);
        LightMaps m = light_maps(g, light);
        for (std::size_t p = 0; p < g.X.pixel_count(); ++p) {
            if (!g.valid.storage()[p]) continue;
            const float* x = g.X.pixel(p);
            const float* d = m.Ldir.pixel(p);
            const double dist = m.Ldist.storage()[p];
            for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(x[k] + dist * d[k] - light.positionCamera[k]));
        }
    }
    c.note("light reconstruction error " + fmt("%.2e", worst) + " m");
    c.expect(worst <= 1e-4, "X + Ldist*Ldir reaches the light within 1e-4 m");

    const double inf = std::numeric_limits<double>::infinity();
    int mismatches = 0, hits = 0;
    SceneGraph s = small_scene(4, 4, 32);
    Bvh bvh = build_bvh(s);
    CounterRng rng(11, 11);
    for (int i = 0; i < 10000; ++i) {
        Ray ray{{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(0.05, 2.5)},
                normalize(Vec3{rng.normal(), rng.normal(), rng.normal()})};
        auto a = bvh.intersect(ray, 1e-9, inf);
        auto b = bvh.intersect_exhaustive(ray, 1e-9, inf);
        if (a.has_value() != b.has_value() || (a && (a->triangle != b->triangle || std::abs(a->t - b->t) > 1e-6))) {
            ++mismatches;
        }
        hits += a.has_value();
    }
    c.note(std::to_string(hits) + " BVH hits, " + std::to_string(mismatches) + " mismatches");
    c.expect(mismatches == 0, "BVH agrees with exhaustive search on 1e4 rays");

    // Floor square at z = 0, occluder square of half-size 0.25 at z = 0.5, light
    // straight above at z = 1.5: the umbra is the square of half-size 0.375.
    SceneGraph scene;
    scene.room.enabled = false;
    scene.camera.intrinsics = Intrinsics::canonical(64, 64);
    scene.camera.pose = look_at({2.0, 0.3, 2.2}, {0, 0, 0}, {0, 0, 1});
    scene.worldToCamera = scene.camera.pose;
    scene.meshes = {make_primitive(PrimitiveKind::Plane, {3.0, 0}), make_primitive(PrimitiveKind::Plane, {0.5, 0})};
    scene.objects = {{0, Pose{}, 1}, {1, Pose{Mat3::identity(), {0, 0, 0.5}}, 2}};
    Bvh sb = build_bvh(scene);
    GBuffer g = raycast_gbuffer(scene, sb, 64, 64);
    std::vector<MaterialSample> mats = {{1, {1, 1, 1}, 0.3, 0.5}, {2, {1, 1, 1}, 0.3, 0.5}};
    MaterialMaps maps = compose_material_maps(g, mats);
    LightSample light = light_at({0, 0, 1.5}, scene.worldToCamera);
    DirectBuffers d = shade_direct(g, maps, light_maps(g, light), light, sb, scene.worldToCamera, ShadeConfig{});
    const Pose c2w = scene.worldToCamera.inverse();
    int inside = 0, lit = 0, wrong = 0;
    for (std::size_t p = 0; p < g.X.pixel_count(); ++p) {
        if (g.instance.storage()[p] != 1) continue;
        const float* x = g.X.pixel(p);
        const Vec3 w = c2w.apply({x[0], x[1], x[2]});
        const double m = std::max(std::abs(w.x), std::abs(w.y));
        if (m < 0.375 - 0.01) {
            ++inside;
            for (int k = 0; k < 3; ++k) wrong += d.Ddir.pixel(p)[k] != 0.0f || d.Gdir.pixel(p)[k] != 0.0f;
        } else if (m > 0.375 + 0.01) {
            ++lit;
            wrong += !(d.Ddir.pixel(p)[0] > 0.0f);
        }
    }
    c.note(std::to_string(inside) + " umbra pixels, " + std::to_string(lit) + " lit pixels");
    c.expect(wrong == 0 && inside > 20 && lit > 100, "hard-shadow umbra is exact");
}

// 4 ---------------------------------------------------------------------------

using ad::Tape;
using ad::Var;
using TensorD = ad::Tensor<double>;
using Builder = std::function<Var(Tape<double>&, std::span<const Var>)>;

TensorD random_tensor(std::vector<int> shape, CounterRng& rng, double lo = -1, double hi = 1) {
    TensorD t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Var weighted_sum(Tape<double>& tape, Var y) {
    CounterRng rng(99, 1);
    TensorD w = random_tensor(tape.value(y).shape, rng);
    return ad::sum(tape, ad::mul(tape, y, tape.constant(w)));
}

double evaluate(const Builder& build, const std::vector<TensorD>& inputs) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    return tape.value(build(tape, vars)).data[0];
}

double gradient_error(const Builder& build, std::vector<TensorD> inputs, double h = 1e-6) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.parameter(t));
    tape.backward(build(tape, vars));
    double worst = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        TensorD analytic = tape.grad(vars[k]);
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double orig = inputs[k].data[i];
            inputs[k].data[i] = orig + h;
            const double up = evaluate(build, inputs);
            inputs[k].data[i] = orig - h;
            const double down = evaluate(build, inputs);
            inputs[k].data[i] = orig;
            const double fd = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(fd - analytic.data[i]) /
                                        std::max({1e-3, std::abs(fd), std::abs(analytic.data[i])}));
        }
    }
    return worst;
}

void avoid(TensorD& t, double at, double gap) {
    for (double& v : t.data) {
        if (std::abs(v - at) < gap) v = at + (v < at ? -gap : gap);
    }
}

template <class Op>
Builder unary(Op op) {
    return [op](Tape<double>& t, std::span<const Var> v) { return weighted_sum(t, op(t, v[0])); };
}

template <class Op>
Builder binary(Op op) {
    return [op](Tape<double>& t, std::span<const Var> v) { return weighted_sum(t, op(t, v[0], v[1])); };
}

void autodiff_correctness(Check& c) {
    CounterRng rng(1, 1);
    std::vector<std::pair<std::string, double>> errors;
    auto run = [&](const std::string& name, const Builder& b, std::vector<TensorD> in) {
        errors.emplace_back(name, gradient_error(b, std::move(in)));
    };
    TensorD a = random_tensor({2, 3, 4}, rng), b = random_tensor({2, 3, 4}, rng);
    run("add", binary([](auto& t, Var x, Var y) { return ad::add(t, x, y); }), {a, b});
    run("sub", binary([](auto& t, Var x, Var y) { return ad::sub(t, x, y); }), {a, b});
    run("mul", binary([](auto& t, Var x, Var y) { return ad::mul(t, x, y); }), {a, b});
    run("scale", unary([](auto& t, Var x) { return ad::scale(t, x, 2.5); }), {a});
    run("softplus", unary([](auto& t, Var x) { return ad::softplus(t, x); }), {a});
    run("sigmoid", unary([](auto& t, Var x) { return ad::sigmoid(t, x); }), {a});
    run("sine", unary([](auto& t, Var x) { return ad::sine(t, x, 3.0); }), {a});
    run("sum", unary([](auto& t, Var x) { return ad::sum(t, x); }), {a});
    TensorD r = a;
    avoid(r, 0.0, 1e-3);
    run("relu", unary([](auto& t, Var x) { return ad::relu(t, x); }), {r});
    TensorD hdr = random_tensor({2, 3, 4}, rng, 0.0, 2.0);
    avoid(hdr, 0.004, 1e-3);
    run("tone_map", unary([](auto& t, Var x) { return ad::tone_map(t, x); }), {hdr});

    TensorD l1 = random_tensor({2, 3, 3}, rng), l2 = random_tensor({1, 3, 3}, rng);
    run("concat",
        [](Tape<double>& t, std::span<const Var> v) {
            std::vector<Var> parts = {v[0], v[1], v[0]};
            return weighted_sum(t, ad::concat(t, std::span<const Var>(parts)));
        },
        {l1, l2});
    run("slice", unary([](auto& t, Var x) { return ad::slice(t, x, 1, 1); }), {l1});
    run("reshape", unary([](auto& t, Var x) { return ad::reshape(t, x, {3, 6}); }), {l1});
    run("broadcast_channels", unary([](auto& t, Var x) { return ad::broadcast_channels(t, x, 3); }), {l2});

    for (int k : {1, 3}) {
        TensorD x = random_tensor({2, 5, 4}, rng), w = random_tensor({3, 2, k, k}, rng), bias = random_tensor({3}, rng);
        run("conv2d k" + std::to_string(k),
            [](Tape<double>& t, std::span<const Var> v) { return weighted_sum(t, ad::conv2d(t, v[0], v[1], v[2])); },
            {x, w, bias});
    }
    TensorD img = random_tensor({2, 4, 6}, rng);
    run("avg_pool2", unary([](auto& t, Var x) { return ad::avg_pool2(t, x); }), {img});
    run("upsample_bilinear2", unary([](auto& t, Var x) { return ad::upsample_bilinear2(t, x); }), {img});

    TensorD vx = random_tensor({4}, rng), vw = random_tensor({3, 4}, rng), vb = random_tensor({3}, rng);
    run("linear",
        [](Tape<double>& t, std::span<const Var> v) { return weighted_sum(t, ad::linear(t, v[0], v[1], v[2])); },
        {vx, vw, vb});
    TensorD table = random_tensor({3, 5}, rng);
    run("row", unary([](auto& t, Var x) { return ad::row(t, x, 2); }), {table});

    TensorD pa = random_tensor({3, 4, 4}, rng), pb = random_tensor({3, 4, 4}, rng);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (std::abs(pa.data[i] - pb.data[i]) < 1e-3) pa.data[i] += 0.01;
    }
    std::vector<std::uint8_t> mask16(16, 1);
    mask16[5] = mask16[9] = 0;
    run("masked_l1",
        [&](Tape<double>& t, std::span<const Var> v) { return ad::masked_l1(t, v[0], v[1], mask16, 2.0); }, {pa, pb});

    TensorD inst = random_tensor({3, 2}, rng);
    std::vector<int> index = {0, 2, -1, 1, 1, 2};
    std::vector<double> scale = {0.5, 1.0, 1.0, 0.25, 2.0, 1.0};
    run("gather_instances",
        [&](Tape<double>& t, std::span<const Var> v) {
            return weighted_sum(
                t, ad::gather_instances(t, v[0], std::span<const int>(index), std::span<const double>(scale), 2, 3));
        },
        {inst});
    TensorD X = random_tensor({3, 2, 3}, rng);
    std::vector<std::uint8_t> mask6 = {1, 1, 0, 1, 1, 1};
    TensorD light({3}, std::vector<double>{0.4, -1.2, 2.5});
    run("light_field",
        [&](Tape<double>& t, std::span<const Var> v) { return weighted_sum(t, ad::light_field(t, v[0], X, mask6, 3.0)); },
        {light});
    for (double z : {0.7, -0.7}) {
        run("hemisphere_point", unary([](auto& t, Var x) { return ad::hemisphere_point(t, x, 1.5); }),
            {TensorD({3}, std::vector<double>{0.3, -0.5, z})});
    }
    Pose pose{Mat3::rotation_axis(normalize(Vec3{1, 2, 3}), 0.8), {0.1, 0.2, 0.3}};
    run("rigid_transform", unary([&](auto& t, Var x) { return ad::rigid_transform(t, x, pose); }),
        {TensorD({3}, std::vector<double>{0.5, 1.0, -0.3})});

    CounterRng rc(9, 9);
    TensorD x = random_tensor({2, 4, 4}, rc);
    TensorD w1 = random_tensor({3, 2, 3, 3}, rc, -0.5, 0.5), b1 = random_tensor({3}, rc, -0.1, 0.1);
    TensorD w2 = random_tensor({2, 5, 3, 3}, rc, -0.5, 0.5), b2 = random_tensor({2}, rc, -0.1, 0.1);
    TensorD target = random_tensor({2, 4, 4}, rc, 3.0, 4.0);
    std::vector<std::uint8_t> maskC(16, 1);
    maskC[0] = 0;
    run("two-layer composite",
        [&](Tape<double>& t, std::span<const Var> v) {
            Var h = ad::relu(t, ad::conv2d(t, v[0], v[1], v[2]));
            Var u = ad::upsample_bilinear2(t, ad::avg_pool2(t, h));
            std::vector<Var> parts = {u, v[0]};
            Var y = ad::softplus(t, ad::conv2d(t, ad::concat(t, std::span<const Var>(parts)), v[3], v[4]));
            return ad::masked_l1(t, y, t.constant(target), maskC, 1.0);
        },
        {x, w1, b1, w2, b2});

    double worst = 0;
    std::string worstName;
    for (const auto& [name, err] : errors) {
        c.expect(err < 1e-4, name + " relative error " + fmt("%.2e", err));
        if (err >= worst) {
            worst = err;
            worstName = name;
        }
    }
    c.note(std::to_string(errors.size()) + " checks, worst " + fmt("%.2e", worst) + " (" + worstName + ")");
}

// Learned renderer shared by 5, 6 and 8 ------------------------------------------

constexpr std::uint64_t kDatasetSeed = 2024;
constexpr int kTrainCount = 200;
constexpr int kHeldOutCount = 50;

struct Dataset {
    SceneContext ctx;
    std::vector<RenderedSample> samples;
    std::vector<TrainSample> train;
};

Dataset render_dataset(const SceneContext& ctx, const RunConfig& cfg, int first, int count) {
    Dataset d{ctx, {}, {}};
    const std::int64_t id = ctx.scene.sceneId;
    for (int i = first; i < first + count; ++i) {
        Randomization r = randomize(ctx, cfg, light_seed(kDatasetSeed, id, i), material_seed(kDatasetSeed, id, i));
        d.samples.push_back(render_sample(ctx, r, cfg.shade));
        d.train.push_back(to_train_sample(ctx.gbuffer, d.samples.back()));
    }
    return d;
}

struct ImageScores {
    double psnr = 0;
    double ssim = 0;
};

ImageScores score(const NetParams& net, const Dataset& d) {
    ImageScores s;
    for (const RenderedSample& r : d.samples) {
        const LdrImage pred = infer_render(net, d.ctx.gbuffer, r.materials, r.lights);
        const LdrImage gt = ldr(r);
        s.psnr += psnr(pred, gt);
        s.ssim += ssim(pred, gt);
    }
    s.psnr /= static_cast<double>(d.samples.size());
    s.ssim /= static_cast<double>(d.samples.size());
    return s;
}

struct SceneANet {
    RunConfig cfg;
    SceneContext ctx;
    NetParams net;
    Dataset train;
};

const SceneANet& scene_a_net() {
    static std::optional<SceneANet> cached;
    if (cached) return *cached;
    SceneANet s;
    s.cfg.resolution = 64;
    s.cfg.meshSet = MeshSet::A;
    s.ctx = prepare_scene(generate_scene(s.cfg, 11, 1), s.cfg.resolution);
    const auto t0 = Clock::now();
    s.train = render_dataset(s.ctx, s.cfg, 0, kTrainCount);
    std::printf("  scene A: %d oracle samples in %.1f s\n", kTrainCount, seconds_since(t0));
    TrainConfig tc;
    tc.epochs = 50;
    const auto t1 = Clock::now();
    TrainResult r = train(init_params(Architecture{}, 1), s.train.train, tc, [&](int epoch, double loss, const NetParams&) {
        if (epoch == 1 || epoch % 10 == 0) {
            std::printf("  epoch %d loss %.4f (%.0f s)\n", epoch, loss, seconds_since(t1));
            std::fflush(stdout);
        }
    });
    s.net = std::move(r.params);
    cached = std::move(s);
    return *cached;
}

// 5 ---------------------------------------------------------------------------

void learned_renderer_quality(Check& c) {
    const SceneANet& a = scene_a_net();
    const ImageScores train = score(a.net, a.train);
    const ImageScores held = score(a.net, render_dataset(a.ctx, a.cfg, kTrainCount, kHeldOutCount));
    RunConfig cfgB = a.cfg;
    cfgB.meshSet = MeshSet::B;
    const SceneContext ctxB = prepare_scene(generate_scene(cfgB, 12, 2), cfgB.resolution);
    const ImageScores cross = score(a.net, render_dataset(ctxB, cfgB, 0, kHeldOutCount));
    c.note("train PSNR " + fmt("%.2f", train.psnr));
    c.note("held-out PSNR " + fmt("%.2f", held.psnr) + " SSIM " + fmt("%.3f", held.ssim));
    c.note("scene B PSNR " + fmt("%.2f", cross.psnr));
    c.expect(train.psnr >= 28.0, "train PSNR >= 28");
    c.expect(held.psnr >= 24.0, "held-out PSNR >= 24");
    c.expect(held.ssim >= 0.85, "held-out SSIM >= 0.85");
    c.expect(cross.psnr >= 20.0, "scene B PSNR >= 20");
}

// 6 ---------------------------------------------------------------------------

void speed(Check& c) {
    const SceneANet& a = scene_a_net();
    RunConfig cfg = a.cfg;
    cfg.shade.indirectSamples = 64;
    cfg.shade.indirectGlossySamples = 32;
    const int images = 3;
    std::vector<Randomization> draws;
    for (int i = 0; i < images; ++i) {
        draws.push_back(randomize(a.ctx, cfg, light_seed(kDatasetSeed, 1, 1000 + i), material_seed(kDatasetSeed, 1, 1000 + i)));
    }
    std::vector<RenderedSample> rendered;
    auto t0 = Clock::now();
    for (const auto& r : draws) rendered.push_back(render_sample(a.ctx, r, cfg.shade));
    const double oracle = seconds_since(t0) / images;
    const int repeats = 5;
    t0 = Clock::now();
    double sink = 0;
    for (int k = 0; k < repeats; ++k) {
        for (const auto& r : rendered) sink += infer_render(a.net, a.ctx.gbuffer, r.materials, r.lights).data()[0];
    }
    const double net = seconds_since(t0) / (repeats * images);
    const double ratio = oracle / net;
    c.note("oracle " + fmt("%.1f", oracle * 1e3) + " ms, net " + fmt("%.1f", net * 1e3) + " ms, ratio " +
           fmt("%.1f", ratio) + "x" + (std::isfinite(sink) ? "" : " (non-finite output)"));
    c.expect(ratio >= 20.0, "network at least 20x faster than the oracle");
}

// 7 ---------------------------------------------------------------------------

/// Lights at 8 to 24 degrees elevation, below the 45 degree fixed light and
/// rare under the uniform-by-solid-angle training draw.
LightSample shifted_light(std::uint64_t index, const Pose& worldToCamera) {
    CounterRng rng(7007, index);
    const double z = rng.uniform(0.14, 0.4);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(1.0 - z * z);
    return light_at(Vec3{r * std::cos(phi), r * std::sin(phi), z} * kLightRadius, worldToCamera);
}

void ablation(Check& c) {
    RunConfig cfg;
    cfg.resolution = 32;
    const SceneContext ctx = prepare_scene(generate_scene(cfg, 11, 1), cfg.resolution);
    const int count = 100;
    TrainConfig tc;
    tc.epochs = 30;

    std::vector<RenderedSample> heldOut;
    const auto ids = ctx.scene.instance_ids();
    for (int i = 0; i < 30; ++i) {
        Randomization r;
        r.lightSeed = 5000 + static_cast<std::uint64_t>(i);
        r.materialSeed = material_seed(kDatasetSeed, 1, 5000 + i);
        r.light = shifted_light(static_cast<std::uint64_t>(i), ctx.scene.worldToCamera);
        r.materials = sample_materials(ids, r.materialSeed);
        heldOut.push_back(render_sample(ctx, r, cfg.shade));
    }

    auto error_for = [&](LightMode mode) {
        RunConfig run = cfg;
        run.lightMode = mode;
        const Dataset d = render_dataset(ctx, run, 0, count);
        const NetParams net = train(init_params(Architecture{}, 1), d.train, tc).params;
        double err = 0;
        for (const RenderedSample& s : heldOut) {
            err += photometric_loss(infer_render(net, ctx.gbuffer, s.materials, s.lights), ldr(s), ctx.gbuffer.valid);
        }
        return err / static_cast<double>(heldOut.size());
    };
    const double fixedErr = error_for(LightMode::Fixed);
    const double dynamicErr = error_for(LightMode::Dynamic);
    c.note("held-out L1 fixed " + fmt("%.4f", fixedErr) + ", dynamic " + fmt("%.4f", dynamicErr));
    c.expect(dynamicErr < fixedErr, "dynamic-light data gives lower error than fixed-light data");
}

// 8 ---------------------------------------------------------------------------

void inverse_recovery(Check& c) {
    const SceneANet& a = scene_a_net();
    const InverseScene sceneA{a.ctx.gbuffer, a.ctx.scene.worldToCamera, a.ctx.scene.sceneId};
    const auto idsA = a.ctx.scene.instance_ids();
    RecoverConfig rc;
    int lightOk = 0;
    std::vector<double> angles;
    for (int t = 0; t < 10; ++t) {
        const LightSample truth = sample_light(9000 + static_cast<std::uint64_t>(t), sceneA.worldToCamera);
        rc.knownMaterials = sample_materials(idsA, 9100 + static_cast<std::uint64_t>(t));
        rc.knownLight.reset();
        rc.seed = static_cast<std::uint64_t>(t);
        const LdrImage target = render_scene(a.net, sceneA, truth, rc.knownMaterials);
        const RecoverResult r = recover_scene(a.net, target, sceneA, RecoverMode::Light, rc);
        const double angle = light_angle_deg(r.light.positionScene, truth.positionScene);
        angles.push_back(angle);
        lightOk += angle <= 10.0;
    }
    std::string list;
    for (double v : angles) list += (list.empty() ? "" : " ") + fmt("%.1f", v);
    c.note("light: " + std::to_string(lightOk) + "/10 within 10 deg [" + list + "]");
    c.expect(lightOk >= 8, "light direction within 10 degrees in >= 8/10 trials");

    RunConfig single = a.cfg;
    single.objects = 1;
    int albedoOk = 0;
    double worstAlbedo = 0;
    for (int t = 0; t < 10; ++t) {
        const SceneContext ctx = prepare_scene(generate_scene(single, 300 + static_cast<std::uint64_t>(t), 10 + t),
                                               single.resolution);
        const InverseScene scene{ctx.gbuffer, ctx.scene.worldToCamera, ctx.scene.sceneId};
        const auto ids = ctx.scene.instance_ids();
        const auto truth = sample_materials(ids, 9200 + static_cast<std::uint64_t>(t));
        rc.knownMaterials.clear();
        rc.knownLight = sample_light(9300 + static_cast<std::uint64_t>(t), scene.worldToCamera);
        rc.seed = static_cast<std::uint64_t>(t);
        const LdrImage target = render_scene(a.net, scene, *rc.knownLight, truth);
        const RecoverResult r = recover_scene(a.net, target, scene, RecoverMode::Material, rc);
        const int object = *std::max_element(ids.begin(), ids.end());
        const Vec3 want = find_material(truth, object).albedoRgb;
        const Vec3 got = find_material(r.materials, object).albedoRgb;
        const double err = std::max({std::abs(want.x - got.x), std::abs(want.y - got.y), std::abs(want.z - got.z)});
        worstAlbedo = std::max(worstAlbedo, err);
        albedoOk += err <= 0.05;
    }
    c.note("albedo: " + std::to_string(albedoOk) + "/10 within 0.05, worst " + fmt("%.3f", worstAlbedo));
    c.expect(albedoOk >= 8, "object albedo within 0.05 per channel in >= 8/10 trials");
}

// 9 ---------------------------------------------------------------------------

std::string bytes_of(const TensorRecord& r) {
    std::ostringstream out;
    write_tensor(out, r);
    return out.str();
}

/// Every stage of a small pipeline, serialized to bytes.
std::vector<std::string> pipeline_outputs() {
    std::vector<std::string> out;
    RunConfig cfg;
    cfg.resolution = 32;
    cfg.shade.indirectSamples = 4;
    cfg.shade.indirectGlossySamples = 2;
    const SceneGraph scene = generate_scene(cfg, 21, 3);
    out.push_back(to_json(scene).dump());
    const SceneContext ctx = prepare_scene(scene, cfg.resolution);
    for (const auto& r : {to_record(ctx.gbuffer.X), to_record(ctx.gbuffer.N), to_record(ctx.gbuffer.instance)}) {
        out.push_back(bytes_of(r));
    }
    std::vector<RenderedSample> samples;
    std::vector<TrainSample> data;
    for (int i = 0; i < 4; ++i) {
        const Randomization r = randomize(ctx, cfg, light_seed(5, 3, i), material_seed(5, 3, i));
        out.push_back(to_json(r.light).dump());
        for (const auto& m : r.materials) out.push_back(to_json(m).dump());
        samples.push_back(render_sample(ctx, r, cfg.shade));
        const LightBuffers& b = samples.back().buffers;
        for (const ImageF* img : {&b.Ddir, &b.Dind, &b.Gdir, &b.Gind}) out.push_back(bytes_of(to_record(*img)));
        data.push_back(to_train_sample(ctx.gbuffer, samples.back()));
    }
    Architecture arch;
    arch.levels = 2;
    arch.baseChannels = 4;
    TrainConfig tc;
    tc.learningRate = 1e-3;
    tc.batchSize = 2;
    tc.epochs = 2;
    tc.seed = 3;
    const TrainResult tr = train(init_params(arch, 3), data, tc);
    for (const auto& t : tr.params.tensors) out.push_back(bytes_of(to_record(t.tensor)));
    for (double l : tr.stepLoss) out.push_back(fmt("%.17g", l));
    const LdrImage img = infer_render(tr.params, ctx.gbuffer, samples[0].materials, samples[0].lights);
    out.push_back(bytes_of(to_record(img)));

    const InverseScene inv{ctx.gbuffer, ctx.scene.worldToCamera, ctx.scene.sceneId};
    RecoverConfig rc;
    rc.steps = 8;
    rc.nInits = 3;
    rc.screenSteps = 3;
    rc.keepInits = 1;
    rc.seed = 4;
    rc.knownMaterials = samples[0].randomization.materials;
    const RecoverResult rr = recover_scene(tr.params, img, inv, RecoverMode::Light, rc);
    out.push_back(to_json(rr.light).dump());
    for (double l : rr.lossHistory) out.push_back(fmt("%.17g", l));
    return out;
}

void determinism(Check& c) {
    const int before = thread_count();
    std::vector<std::vector<std::string>> runs;
    for (int threads : {1, 4, 3}) {
        set_thread_count(threads);
        runs.push_back(pipeline_outputs());
    }
    set_thread_count(before);
    for (std::size_t r = 1; r < runs.size(); ++r) {
        c.expect(runs[r].size() == runs[0].size(), "same number of outputs");
        if (runs[r].size() != runs[0].size()) continue;
        int differing = 0;
        for (std::size_t i = 0; i < runs[0].size(); ++i) differing += runs[r][i] != runs[0][i];
        c.expect(differing == 0, std::to_string(differing) + " outputs differ between thread counts");
    }
    c.note(std::to_string(runs[0].size()) + " outputs compared at 1, 4 and 3 threads");
}

struct Criterion {
    int number;
    const char* name;
    void (*run)(Check&);
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "formula golden tests", formula_goldens},
        {2, "BSDF physics", bsdf_physics},
        {3, "geometry consistency", geometry_consistency},
        {4, "autodiff correctness", autodiff_correctness},
        {5, "learned-renderer quality", learned_renderer_quality},
        {6, "speed", speed},
        {7, "lighting ablation", ablation},
        {8, "inverse recovery", inverse_recovery},
        {9, "determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const Criterion& cr : criteria) {
        if (!selected.empty() && !selected.count(cr.number)) continue;
        Check check;
        const auto t0 = Clock::now();
        try {
            cr.run(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const bool ok = check.passed();
        failed += !ok;
        std::printf("%s %d %s (%.1f s): %s\n", ok ? "PASS" : "FAIL", cr.number, cr.name, seconds_since(t0),
                    check.summary().c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
