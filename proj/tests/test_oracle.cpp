#include <gtest/gtest.h>

#include <cmath>

#include "pndr/oracle.hpp"
#include "pndr/parallel.hpp"
#include "pndr/rng.hpp"
#include "test_util.hpp"

using namespace pndr;

namespace {

Vec3 from_spherical(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

double ggx_d_reference(double nDotH, double alpha) {
    const double a2 = alpha * alpha;
    const double t = nDotH * nDotH * (a2 - 1.0) + 1.0;
    return a2 / (kPi * t * t);
}

struct Fixture {
    SceneGraph scene;
    Bvh bvh;
    GBuffer g;
    std::vector<MaterialSample> materials;
    MaterialMaps maps;
    LightSample light;
    LightMaps lights;
};

Fixture make_setup(SceneGraph scene, int size, std::vector<MaterialSample> materials, const LightSample& light) {
    Fixture s;
    s.scene = std::move(scene);
    s.bvh = build_bvh(s.scene);
    s.g = raycast_gbuffer(s.scene, s.bvh, size, size);
    s.materials = std::move(materials);
    s.maps = compose_material_maps(s.g, s.materials);
    s.light = light;
    s.lights = light_maps(s.g, light);
    return s;
}

Fixture random_setup(SceneGraph scene, int size, std::uint64_t seed) {
    auto mats = sample_materials(scene.instance_ids(), seed);
    LightSample light = sample_light(seed, scene.worldToCamera);
    return make_setup(std::move(scene), size, std::move(mats), light);
}

SceneGraph open_scene(const Vec3& eye) {
    SceneGraph s;
    s.room.enabled = false;
    s.camera.intrinsics = Intrinsics::canonical(32, 32);
    s.camera.pose = look_at(eye, {0, 0, 0}, {0, 0, 1});
    s.worldToCamera = s.camera.pose;
    return s;
}

GBuffer plate_pixel() {
    GBuffer g(8, 8);
    g.X.at(4, 4, 2) = 2.0f;
    g.N.at(4, 4, 2) = -1.0f;
    g.instance.at(4, 4) = 1;
    g.baseAlbedo.at(4, 4) = 1.0f;
    g.valid.at(4, 4) = 1;
    return g;
}

}  // namespace

TEST(OrenNayar, LambertianLimitIsOne) {
    EXPECT_EQ(oren_nayar_factor(0.3, 0.8, 1.0, 0.0), 1.0);
    EXPECT_EQ(oren_nayar_factor(1.0, 1.0, 0.0, 0.0), 1.0);
}

TEST(OrenNayar, NormalIncidenceIsTheATerm) {
    const double expected = 1.0 - 0.5 * 0.25 / (0.25 + 0.33);
    EXPECT_NEAR(oren_nayar_factor(1.0, 1.0, 0.0, 0.5), expected, 1e-12);
    EXPECT_NEAR(expected, 0.7845, 1e-4);
}

TEST(OrenNayar, SymmetricAndBounded) {
    CounterRng rng(1, 1);
    for (int i = 0; i < 1000; ++i) {
        double a = rng.uniform(0.01, 1.0), b = rng.uniform(0.01, 1.0);
        double phi = rng.uniform(-kPi, kPi), sigma = rng.uniform(0, 1.2);
        double f = oren_nayar_factor(a, b, phi, sigma);
        EXPECT_NEAR(f, oren_nayar_factor(b, a, phi, sigma), 1e-12);
        EXPECT_GT(f, 0.0);
        EXPECT_LE(f, kOrenNayarMax);
    }
}

TEST(Ggx, DistributionAtMirror) {
    Vec3 n{0, 0, 1};
    EXPECT_NEAR(ggx_distribution(1.0, 0.5), 1.0 / (kPi * 0.25), 1e-12);
    EXPECT_NEAR(ggx_distribution(1.0, 0.5), 1.2732, 1e-4);
    // Mirror configuration: h = n, so D is the peak value.
    Vec3 wi = from_spherical(0.4, 0.0), wo = from_spherical(0.4, kPi);
    double lambda = ggx_lambda(std::cos(0.4), 0.5);
    double expected = 1.2732395 / (1 + 2 * lambda) / (4 * std::cos(0.4) * std::cos(0.4));
    EXPECT_NEAR(ggx_specular(n, wi, wo, 0.5), expected, 1e-6);
}

TEST(Ggx, Reciprocity) {
    CounterRng rng(2, 2);
    Vec3 n{0, 0, 1};
    for (int i = 0; i < 1000; ++i) {
        Vec3 wi = from_spherical(rng.uniform(0, 1.5), rng.uniform(0, 2 * kPi));
        Vec3 wo = from_spherical(rng.uniform(0, 1.5), rng.uniform(0, 2 * kPi));
        double alpha = rng.uniform(0.0025, 1.0);
        double a = ggx_specular(n, wi, wo, alpha), b = ggx_specular(n, wo, wi, alpha);
        EXPECT_LE(std::abs(a - b), 1e-9 * std::max(1.0, std::abs(a)));
        EXPECT_GE(a, 0.0);
        EXPECT_TRUE(std::isfinite(a));
    }
}

TEST(Ggx, HemisphericalEnergyIsBounded) {
    // Importance sampling by D(h) cos(theta_h); pdf(wi) = D cos(theta_h) / (4 wo.h).
    Vec3 n{0, 0, 1};
    for (double alpha : {0.1, 0.3, 0.8}) {
        for (double thetaO : {0.0, 0.8, 1.3}) {
            Vec3 wo = from_spherical(thetaO, 0.3);
            CounterRng rng(7, 3);
            const int samples = 100000;
            double sum = 0;
            for (int i = 0; i < samples; ++i) {
                double u1 = rng.uniform(), u2 = rng.uniform();
                double tan2 = alpha * alpha * u1 / (1 - u1);
                double ct = 1 / std::sqrt(1 + tan2);
                Vec3 h = from_spherical(std::acos(ct), 2 * kPi * u2);
                double oh = dot(wo, h);
                if (oh <= 0) continue;
                Vec3 wi = h * (2 * oh) - wo;
                if (wi.z <= 0) continue;
                double pdf = ggx_d_reference(ct, alpha) * ct / (4 * oh);
                sum += ggx_specular(n, wi, wo, alpha) * wi.z / pdf;
            }
            double energy = sum / samples;
            EXPECT_LE(energy, 1.02) << "alpha " << alpha << " theta " << thetaO;
            EXPECT_GT(energy, 0.3) << "alpha " << alpha << " theta " << thetaO;
        }
    }
}

TEST(Lambertian, WhiteFurnace) {
    // Directional-hemispherical reflectance of albedo * factor / pi by uniform sampling.
    const double albedo = 0.8;
    Vec3 n{0, 0, 1}, wo = from_spherical(0.6, 0.0);
    CounterRng rng(5, 5);
    const int samples = 100000;
    double sum = 0;
    for (int i = 0; i < samples; ++i) {
        double z = rng.uniform(), phi = 2 * kPi * rng.uniform();
        Vec3 wi = from_spherical(std::acos(z), phi);
        double f = albedo * oren_nayar_factor(wi.z, dot(n, wo), phi, 0.0) * kInvPi;
        sum += f * wi.z * 2 * kPi;
    }
    EXPECT_NEAR(sum / samples, albedo, 0.01 * albedo);
}

TEST(Samplers, CosineHemisphereMoments) {
    CounterRng rng(6, 6);
    const int n = 100000;
    double sz = 0;
    for (int i = 0; i < n; ++i) {
        Vec3 d = sample_cosine_hemisphere(rng.uniform(), rng.uniform());
        ASSERT_NEAR(length(d), 1.0, 1e-12);
        ASSERT_GE(d.z, 0.0);
        sz += d.z;
    }
    EXPECT_NEAR(sz / n, 2.0 / 3.0, 0.005);
}

TEST(ShadeDirect, LambertianPlate) {
    GBuffer g = plate_pixel();
    MaterialMaps m{ImageF(8, 8, 3), ImageF(8, 8, 1), ImageF(8, 8, 1)};  // R = 0 -> sigma = 0
    LightSample light{{}, {0, 0, 1}, 1.0};
    LightMaps lm = light_maps(g, light);
    Bvh empty;
    DirectBuffers d = shade_direct(g, m, lm, light, empty, Pose{}, ShadeConfig{});
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(d.Ddir.at(4, 4, c), 1.0 / kPi, 1e-6);
    EXPECT_EQ(d.Ddir.at(0, 0, 0), 0.0f);
}

TEST(ShadeDirect, LightBehindSurfaceIsBlack) {
    GBuffer g = plate_pixel();
    MaterialMaps m{ImageF(8, 8, 3), ImageF(8, 8, 1, 0.5f), ImageF(8, 8, 1)};
    LightSample light{{}, {0, 0, 3}, 1.0};
    Bvh empty;
    DirectBuffers d = shade_direct(g, m, light_maps(g, light), light, empty, Pose{}, ShadeConfig{});
    for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(d.Ddir.at(4, 4, c), 0.0f);
        EXPECT_EQ(d.Gdir.at(4, 4, c), 0.0f);
    }
}

TEST(ShadeDirect, OrenNayarAtZeroSigmaMatchesLambertianPath) {
    Fixture s = random_setup(test::small_scene(1, 3), 32, 3);
    std::fill(s.maps.R.storage().begin(), s.maps.R.storage().end(), 0.0f);
    ShadeConfig on, lambert;
    lambert.diffuseModel = DiffuseModel::Lambertian;
    DirectBuffers a = shade_direct(s.g, s.maps, s.lights, s.light, s.bvh, s.scene.worldToCamera, on);
    DirectBuffers b = shade_direct(s.g, s.maps, s.lights, s.light, s.bvh, s.scene.worldToCamera, lambert);
    EXPECT_EQ(a.Ddir, b.Ddir);
    EXPECT_EQ(a.Gdir, b.Gdir);
}

TEST(ShadeDirect, HardShadowUmbra) {
    // Floor square at z = 0, occluding square of half-size 0.25 at z = 0.5, light
    // straight above at z = 1.5: the umbra is the square of half-size 0.375.
    SceneGraph scene = open_scene({2.0, 0.3, 2.2});
    scene.meshes = {make_primitive(PrimitiveKind::Plane, {3.0, 0}), make_primitive(PrimitiveKind::Plane, {0.5, 0})};
    scene.objects = {{0, Pose{}, 1}, {1, Pose{Mat3::identity(), {0, 0, 0.5}}, 2}};
    LightSample light = light_at({0, 0, 1.5}, scene.worldToCamera);
    std::vector<MaterialSample> mats = {{1, {1, 1, 1}, 0.3, 0.5}, {2, {1, 1, 1}, 0.3, 0.5}};
    Fixture s = make_setup(scene, 64, mats, light);
    DirectBuffers d = shade_direct(s.g, s.maps, s.lights, s.light, s.bvh, scene.worldToCamera, ShadeConfig{});
    const Pose c2w = scene.worldToCamera.inverse();
    int inside = 0, outside = 0;
    for (std::size_t p = 0; p < s.g.X.pixel_count(); ++p) {
        if (s.g.instance.storage()[p] != 1) continue;
        const float* x = s.g.X.pixel(p);
        Vec3 w = c2w.apply({x[0], x[1], x[2]});
        double m = std::max(std::abs(w.x), std::abs(w.y));
        if (m < 0.375 - 0.01) {
            ++inside;
            for (int c = 0; c < 3; ++c) {
                EXPECT_EQ(d.Ddir.pixel(p)[c], 0.0f);
                EXPECT_EQ(d.Gdir.pixel(p)[c], 0.0f);
            }
        } else if (m > 0.375 + 0.01) {
            ++outside;
            EXPECT_GT(d.Ddir.pixel(p)[0], 0.0f);
        }
    }
    EXPECT_GT(inside, 20);
    EXPECT_GT(outside, 100);
}

TEST(ShadeIndirect, ZeroSamplesGivesZeroBuffers) {
    Fixture s = random_setup(test::small_scene(2, 3), 16, 1);
    ShadeConfig cfg;
    cfg.indirectSamples = 0;
    IndirectBuffers ind = shade_indirect(s.g, s.maps, s.light, s.bvh, s.materials, s.scene.worldToCamera, cfg);
    for (float v : ind.Dind.data()) EXPECT_EQ(v, 0.0f);
    for (float v : ind.Gind.data()) EXPECT_EQ(v, 0.0f);
}

TEST(ShadeIndirect, IsolatedConvexObjectReceivesNothing) {
    SceneGraph scene = open_scene({1.5, 0.5, 1.2});
    scene.meshes = {make_primitive(PrimitiveKind::Plane, {1.0, 0})};
    scene.objects = {{0, Pose{}, 1}};
    std::vector<MaterialSample> mats = {{1, {1, 1, 1}, 0.5, 0.5}};
    Fixture s = make_setup(scene, 16, mats, light_at({0.3, 0.2, 1.0}, scene.worldToCamera));
    ASSERT_GT(s.g.valid_count(), 0u);
    ShadeConfig cfg;
    cfg.indirectSamples = 32;
    IndirectBuffers ind = shade_indirect(s.g, s.maps, s.light, s.bvh, s.materials, scene.worldToCamera, cfg);
    for (float v : ind.Dind.data()) EXPECT_EQ(v, 0.0f);
    for (float v : ind.Gind.data()) EXPECT_EQ(v, 0.0f);
}

TEST(ShadeIndirect, CornerSceneConvergesWithSampleCount) {
    SceneGraph scene = open_scene({1.2, 1.2, 2.0});
    scene.room.enabled = true;
    scene.camera.pose = look_at({1.2, 1.2, 2.0}, {-2, -2, 0.5}, {0, 0, 1});
    scene.worldToCamera = scene.camera.pose;
    std::vector<MaterialSample> mats = {{0, {1, 1, 1}, 0.5, 0.5}};
    Fixture s = make_setup(scene, 16, mats, light_at({0.5, -0.4, 1.4}, scene.worldToCamera));
    ShadeConfig cfg;
    cfg.diffuseModel = DiffuseModel::Lambertian;
    cfg.indirectGlossySamples = 0;
    auto image_mean = [&](int samples, std::uint64_t seed) {
        cfg.indirectSamples = samples;
        cfg.seed = seed;
        IndirectBuffers ind = shade_indirect(s.g, s.maps, s.light, s.bvh, s.materials, scene.worldToCamera, cfg);
        double sum = 0;
        for (float v : ind.Dind.data()) sum += v;
        return sum / ind.Dind.size();
    };
    // Standard error of the 64-sample estimate from independent repeats.
    std::vector<double> m64;
    for (std::uint64_t seed = 0; seed < 8; ++seed) m64.push_back(image_mean(64, seed));
    double mean = 0, var = 0;
    for (double v : m64) mean += v / m64.size();
    for (double v : m64) var += (v - mean) * (v - mean) / (m64.size() - 1);
    double se = std::sqrt(var + var / 4.0);
    double ref = image_mean(256, 100);
    EXPECT_GT(ref, 0.0);
    EXPECT_LT(std::abs(m64[0] - ref), 3 * se + 1e-12);
}

TEST(RenderOracle, BuffersAreFiniteNonNegativeAndDeterministic) {
    SceneGraph scene = test::small_scene(6, 3);
    Fixture s = random_setup(scene, 24, 6);
    ShadeConfig cfg;
    cfg.seed = 6;
    set_thread_count(1);
    LightBuffers a = render_oracle(s.g, s.maps, s.lights, s.light, s.bvh, s.materials, scene.worldToCamera, cfg);
    set_thread_count(3);
    LightBuffers b = render_oracle(s.g, s.maps, s.lights, s.light, s.bvh, s.materials, scene.worldToCamera, cfg);
    set_thread_count(0);
    for (const ImageF* img : {&a.Ddir, &a.Dind, &a.Gdir, &a.Gind}) {
        for (float v : img->data()) {
            EXPECT_TRUE(std::isfinite(v));
            EXPECT_GE(v, 0.0f);
        }
    }
    EXPECT_EQ(a.Ddir, b.Ddir);
    EXPECT_EQ(a.Dind, b.Dind);
    EXPECT_EQ(a.Gdir, b.Gdir);
    EXPECT_EQ(a.Gind, b.Gind);
    double indirect = 0;
    for (float v : a.Dind.data()) indirect += v;
    EXPECT_GT(indirect, 0.0);
}
