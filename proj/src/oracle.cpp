#include "pndr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "pndr/parallel.hpp"
#include "pndr/rng.hpp"

namespace pndr {

double oren_nayar_factor_cos(double nDotL, double nDotV, double cosPhiDiff, double sigma) {
    const double s2 = sigma * sigma;
    const double a = 1.0 - 0.5 * s2 / (s2 + 0.33);
    const double b = 0.45 * s2 / (s2 + 0.09);
    if (b == 0.0) return a;
    const double thetaI = std::acos(std::clamp(nDotL, -1.0, 1.0));
    const double thetaO = std::acos(std::clamp(nDotV, -1.0, 1.0));
    const double alpha = std::max(thetaI, thetaO);
    const double beta = std::min(thetaI, thetaO);
    const double f = a + b * std::max(0.0, cosPhiDiff) * std::sin(alpha) * std::tan(beta);
    return std::min(f, kOrenNayarMax);
}

double oren_nayar_factor(double nDotL, double nDotV, double phiDiff, double sigma) {
    return oren_nayar_factor_cos(nDotL, nDotV, std::cos(phiDiff), sigma);
}

double ggx_distribution(double nDotH, double alpha) {
    const double a2 = alpha * alpha;
    const double d = nDotH * nDotH * (a2 - 1.0) + 1.0;
    return a2 / (kPi * d * d);
}

double ggx_lambda(double cosTheta, double alpha) {
    const double c2 = cosTheta * cosTheta;
    const double tan2 = std::max(0.0, 1.0 - c2) / c2;
    return 0.5 * (-1.0 + std::sqrt(1.0 + alpha * alpha * tan2));
}

double ggx_specular(const Vec3& n, const Vec3& wi, const Vec3& wo, double alpha) {
    const double cosI = dot(n, wi), cosO = dot(n, wo);
    if (cosI <= 0 || cosO <= 0) return 0.0;
    const Vec3 h = normalize(wi + wo);
    const double d = ggx_distribution(dot(n, h), alpha);
    const double g = 1.0 / (1.0 + ggx_lambda(cosI, alpha) + ggx_lambda(cosO, alpha));
    return d * g / (4.0 * cosI * cosO);
}

Vec3 sample_cosine_hemisphere(double u1, double u2) {
    const double r = std::sqrt(u1);
    const double phi = 2.0 * kPi * u2;
    return {r * std::cos(phi), r * std::sin(phi), std::sqrt(std::max(0.0, 1.0 - u1))};
}

Vec3 sample_ggx_half_vector(double u1, double u2, double alpha) {
    // D(h) cos(theta_h) sampling: tan^2 theta = alpha^2 u / (1 - u).
    const double tan2 = alpha * alpha * u1 / std::max(1e-300, 1.0 - u1);
    const double cosT = 1.0 / std::sqrt(1.0 + tan2);
    const double sinT = std::sqrt(std::max(0.0, 1.0 - cosT * cosT));
    const double phi = 2.0 * kPi * u2;
    return {sinT * std::cos(phi), sinT * std::sin(phi), cosT};
}

namespace {

Vec3 load3(const ImageF& img, std::size_t p) {
    const float* v = img.pixel(p);
    return {v[0], v[1], v[2]};
}

void store_gray(ImageF& img, std::size_t p, double value) {
    float* v = img.pixel(p);
    v[0] = v[1] = v[2] = static_cast<float>(value);
}

double cos_azimuth_between(const Vec3& n, const Vec3& l, const Vec3& v) {
    const Vec3 lt = l - n * dot(n, l);
    const Vec3 vt = v - n * dot(n, v);
    const double ll = length(lt), lv = length(vt);
    if (ll < 1e-12 || lv < 1e-12) return 0.0;
    return dot(lt, vt) / (ll * lv);
}

double diffuse_factor(DiffuseModel model, const Vec3& n, const Vec3& l, const Vec3& v, double roughness) {
    if (model == DiffuseModel::Lambertian) return 1.0;
    return oren_nayar_factor_cos(dot(n, l), dot(n, v), cos_azimuth_between(n, l, v), roughness_to_sigma(roughness));
}

bool visible(const Bvh& bvh, const Vec3& p, const Vec3& n, const Vec3& lightPos, double eps) {
    const Vec3 origin = p + n * eps;
    const Vec3 d = lightPos - origin;
    const double dist = length(d);
    if (dist <= eps) return true;
    return !bvh.occluded({origin, d / dist}, 0.0, dist - eps);
}

class MaterialTable {
public:
    explicit MaterialTable(std::span<const MaterialSample> samples) {
        for (const auto& m : samples) table_.emplace(m.objectId, m);
    }
    const MaterialSample& at(int id) const {
        auto it = table_.find(id);
        if (it == table_.end()) throw MissingMaterial("no material sample for instance " + std::to_string(id));
        return it->second;
    }

private:
    std::unordered_map<int, MaterialSample> table_;
};

// Outgoing direct diffuse radiance at a secondary hit toward `toViewer`.
Vec3 secondary_radiance(const Bvh& bvh, const Hit& hit, const Vec3& pos, const Vec3& toViewer,
                        const LightSample& light, const MaterialTable& materials, const ShadeConfig& cfg) {
    Vec3 n = bvh.shading_normal(hit);
    if (dot(n, toViewer) < 0) n = -n;
    const Vec3 toLight = light.positionScene - pos;
    const double dist2 = dot(toLight, toLight);
    const Vec3 l = toLight / std::sqrt(dist2);
    const double cosL = dot(n, l);
    if (cosL <= 0) return {};
    if (!visible(bvh, pos, n, light.positionScene, cfg.shadowEpsilon)) return {};
    const BvhTriangle& tri = bvh.triangles()[hit.triangle];
    const MaterialSample& m = materials.at(tri.instance);
    const double e = light.intensity * cosL / dist2;
    const double f = diffuse_factor(cfg.diffuseModel, n, l, toViewer, m.roughness);
    const double scale = e * f * kInvPi * bvh.albedo(hit);
    return m.albedoRgb * scale;
}

}  // namespace

DirectBuffers shade_direct(const GBuffer& g, const MaterialMaps& mat, const LightMaps& lm, const LightSample& light,
                           const Bvh& bvh, const Pose& worldToCamera, const ShadeConfig& cfg) {
    if (!mat.A.same_extent(g.X) || !lm.Ldir.same_extent(g.X)) throw InvalidArgument("buffer resolution mismatch");
    DirectBuffers out{ImageF(g.height, g.width, 3), ImageF(g.height, g.width, 3)};
    const Pose c2w = worldToCamera.inverse();
    parallel_for(static_cast<std::size_t>(g.height), [&](std::size_t row) {
        for (int x = 0; x < g.width; ++x) {
            const std::size_t p = row * g.width + x;
            if (!g.valid.storage()[p]) continue;
            const Vec3 X = load3(g.X, p);
            const Vec3 n = load3(g.N, p);
            const Vec3 l = load3(lm.Ldir, p);
            const double dist = lm.Ldist.storage()[p];
            const double cosL = dot(n, l);
            if (cosL <= 0) continue;
            if (!visible(bvh, c2w.apply(X), c2w.apply_direction(n), light.positionScene, cfg.shadowEpsilon)) continue;
            const double e = light.intensity * cosL / (dist * dist);
            const Vec3 v = normalize(-X);
            const double r = mat.R.storage()[p];
            store_gray(out.Ddir, p, e * diffuse_factor(cfg.diffuseModel, n, l, v, r) * kInvPi);
            store_gray(out.Gdir, p, e * ggx_specular(n, l, v, roughness_to_alpha(r)));
        }
    });
    return out;
}

IndirectBuffers shade_indirect(const GBuffer& g, const MaterialMaps& mat, const LightSample& light, const Bvh& bvh,
                               std::span<const MaterialSample> instanceMaterials, const Pose& worldToCamera,
                               const ShadeConfig& cfg) {
    IndirectBuffers out{ImageF(g.height, g.width, 3), ImageF(g.height, g.width, 3)};
    if (cfg.indirectSamples <= 0) return out;
    if (!mat.A.same_extent(g.X)) throw InvalidArgument("buffer resolution mismatch");
    const MaterialTable table(instanceMaterials);
    const Pose c2w = worldToCamera.inverse();
    const std::uint64_t diffuseSeed = hash_counter(cfg.seed, static_cast<std::uint64_t>(Stream::IndirectDiffuse), 0);
    const std::uint64_t glossySeed = hash_counter(cfg.seed, static_cast<std::uint64_t>(Stream::IndirectGlossy), 0);
    constexpr double kInf = std::numeric_limits<double>::infinity();

    parallel_for(static_cast<std::size_t>(g.height), [&](std::size_t row) {
        for (int x = 0; x < g.width; ++x) {
            const std::size_t p = row * g.width + x;
            if (!g.valid.storage()[p]) continue;
            // Shading happens in world space; the receiver frame is rebuilt from the G-buffer.
            const Vec3 pos = c2w.apply(load3(g.X, p));
            const Vec3 n = normalize(c2w.apply_direction(load3(g.N, p)));
            const Vec3 v = normalize(c2w.translation - pos);
            const double r = mat.R.storage()[p];
            const Vec3 origin = pos + n * cfg.shadowEpsilon;
            Vec3 t, b;
            orthonormal_basis(n, t, b);

            Vec3 diffuse;
            for (int s = 0; s < cfg.indirectSamples; ++s) {
                const Vec3 local = sample_cosine_hemisphere(uniform01(diffuseSeed, p, 2ULL * s),
                                                            uniform01(diffuseSeed, p, 2ULL * s + 1));
                const Vec3 wi = t * local.x + b * local.y + n * local.z;
                const auto hit = bvh.intersect({origin, wi}, 0.0, kInf);
                if (!hit) continue;
                const Vec3 q = origin + wi * hit->t;
                const Vec3 li = secondary_radiance(bvh, *hit, q, -wi, light, table, cfg);
                diffuse += li * diffuse_factor(cfg.diffuseModel, n, wi, v, r);
            }
            diffuse *= 1.0 / cfg.indirectSamples;

            Vec3 glossy;
            if (cfg.indirectGlossySamples > 0) {
                const double alpha = roughness_to_alpha(r);
                const double cosO = dot(n, v);
                for (int s = 0; s < cfg.indirectGlossySamples && cosO > 0; ++s) {
                    const Vec3 hl = sample_ggx_half_vector(uniform01(glossySeed, p, 2ULL * s),
                                                           uniform01(glossySeed, p, 2ULL * s + 1), alpha);
                    const Vec3 h = t * hl.x + b * hl.y + n * hl.z;
                    const double vh = dot(v, h);
                    if (vh <= 0) continue;
                    const Vec3 wi = h * (2.0 * vh) - v;
                    const double cosI = dot(n, wi);
                    if (cosI <= 0) continue;
                    const auto hit = bvh.intersect({origin, wi}, 0.0, kInf);
                    if (!hit) continue;
                    const Vec3 q = origin + wi * hit->t;
                    const Vec3 li = secondary_radiance(bvh, *hit, q, -wi, light, table, cfg);
                    const double g2 = 1.0 / (1.0 + ggx_lambda(cosI, alpha) + ggx_lambda(cosO, alpha));
                    glossy += li * (g2 * vh / (cosO * hl.z));
                }
                glossy *= 1.0 / cfg.indirectGlossySamples;
            }
            float* d = out.Dind.pixel(p);
            float* gl = out.Gind.pixel(p);
            for (int c = 0; c < 3; ++c) {
                d[c] = static_cast<float>(diffuse[c]);
                gl[c] = static_cast<float>(glossy[c]);
            }
        }
    });
    return out;
}

LightBuffers render_oracle(const GBuffer& g, const MaterialMaps& mat, const LightMaps& lm, const LightSample& light,
                           const Bvh& bvh, std::span<const MaterialSample> instanceMaterials,
                           const Pose& worldToCamera, const ShadeConfig& cfg) {
    auto direct = shade_direct(g, mat, lm, light, bvh, worldToCamera, cfg);
    auto indirect = shade_indirect(g, mat, light, bvh, instanceMaterials, worldToCamera, cfg);
    LightBuffers out;
    out.Ddir = std::move(direct.Ddir);
    out.Gdir = std::move(direct.Gdir);
    out.Dind = std::move(indirect.Dind);
    out.Gind = std::move(indirect.Gind);
    return out;
}

}  // namespace pndr
