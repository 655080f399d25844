#include "pndr/gbuffer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "pndr/parallel.hpp"

namespace pndr {

std::optional<Hit> intersect_triangle(const Ray& ray, const BvhTriangle& tri, double tMin, double tMax) {
    const Vec3 e1 = tri.p[1] - tri.p[0];
    const Vec3 e2 = tri.p[2] - tri.p[0];
    const Vec3 pv = cross(ray.direction, e2);
    const double det = dot(e1, pv);
    if (det == 0.0) return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 tv = ray.origin - tri.p[0];
    const double u = dot(tv, pv) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 qv = cross(tv, e1);
    const double v = dot(ray.direction, qv) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    const double t = dot(e2, qv) * inv;
    if (!(t > tMin && t < tMax)) return std::nullopt;
    return Hit{t, -1, u, v};
}

namespace {

struct Bounds {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};
    void grow(const Vec3& p) {
        lo = vmin(lo, p);
        hi = vmax(hi, p);
    }
};

Vec3 centroid(const BvhTriangle& t) { return (t.p[0] + t.p[1] + t.p[2]) / 3.0; }

// Slab test; returns the entry distance or +inf on a miss.
double hit_box(const Vec3& lo, const Vec3& hi, const Ray& ray, double tMin, double tMax) {
    double t0 = tMin, t1 = tMax;
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a], d = ray.direction[a];
        if (d == 0.0) {
            if (o < lo[a] || o > hi[a]) return std::numeric_limits<double>::infinity();
            continue;
        }
        const double inv = 1.0 / d;
        double tn = (lo[a] - o) * inv, tf = (hi[a] - o) * inv;
        if (tn > tf) std::swap(tn, tf);
        t0 = std::max(t0, tn);
        t1 = std::min(t1, tf);
        if (t0 > t1) return std::numeric_limits<double>::infinity();
    }
    return t0;
}

bool closer(const Hit& a, const Hit& b) { return a.t < b.t || (a.t == b.t && a.triangle < b.triangle); }

}  // namespace

Bvh::Bvh(std::vector<BvhTriangle> triangles) : triangles_(std::move(triangles)) {
    order_.resize(triangles_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!triangles_.empty()) {
        nodes_.reserve(2 * triangles_.size());
        build(0, static_cast<int>(triangles_.size()));
    }
}

int Bvh::build(int first, int count) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Bounds box, cbox;
    for (int i = first; i < first + count; ++i) {
        const BvhTriangle& t = triangles_[order_[i]];
        for (const Vec3& p : t.p) box.grow(p);
        cbox.grow(centroid(t));
    }
    nodes_[index].lo = box.lo;
    nodes_[index].hi = box.hi;
    if (count <= kMaxLeafSize) {
        nodes_[index].first = first;
        nodes_[index].count = count;
        return index;
    }
    const Vec3 extent = cbox.hi - cbox.lo;
    int axis = 0;
    if (extent.y > extent[axis]) axis = 1;
    if (extent.z > extent[axis]) axis = 2;
    const int mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](int a, int b) {
                         const double ca = centroid(triangles_[a])[axis], cb = centroid(triangles_[b])[axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    const int left = build(first, mid - first);
    const int right = build(mid, first + count - mid);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

std::optional<Hit> Bvh::intersect(const Ray& ray, double tMin, double tMax) const {
    if (nodes_.empty()) return std::nullopt;
    std::optional<Hit> best;
    double limit = tMax;
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        // Inclusive bound so equal-distance ties can still be resolved by index.
        if (hit_box(node.lo, node.hi, ray, tMin, limit) > limit) continue;
        if (node.leaf()) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const int tri = order_[i];
                auto h = intersect_triangle(ray, triangles_[tri], tMin, best ? std::nextafter(limit, INFINITY) : limit);
                if (!h) continue;
                h->triangle = tri;
                if (!best || closer(*h, *best)) {
                    best = h;
                    limit = h->t;
                }
            }
            continue;
        }
        const Node& l = nodes_[node.left];
        const Node& r = nodes_[node.right];
        const double dl = hit_box(l.lo, l.hi, ray, tMin, limit);
        const double dr = hit_box(r.lo, r.hi, ray, tMin, limit);
        // Push the farther child first so the nearer one is visited next.
        if (dl <= dr) {
            if (dr <= limit) stack[top++] = node.right;
            if (dl <= limit) stack[top++] = node.left;
        } else {
            if (dl <= limit) stack[top++] = node.left;
            if (dr <= limit) stack[top++] = node.right;
        }
    }
    return best;
}

bool Bvh::occluded(const Ray& ray, double tMin, double tMax) const {
    if (nodes_.empty()) return false;
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (hit_box(node.lo, node.hi, ray, tMin, tMax) > tMax) continue;
        if (node.leaf()) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                if (intersect_triangle(ray, triangles_[order_[i]], tMin, tMax)) return true;
            }
        } else {
            stack[top++] = node.right;
            stack[top++] = node.left;
        }
    }
    return false;
}

std::optional<Hit> Bvh::intersect_exhaustive(const Ray& ray, double tMin, double tMax) const {
    std::optional<Hit> best;
    for (int i = 0; i < static_cast<int>(triangles_.size()); ++i) {
        auto h = intersect_triangle(ray, triangles_[i], tMin, tMax);
        if (!h) continue;
        h->triangle = i;
        if (!best || closer(*h, *best)) best = h;
    }
    return best;
}

Vec3 Bvh::shading_normal(const Hit& hit) const {
    const BvhTriangle& t = triangles_[hit.triangle];
    const double w = 1.0 - hit.u - hit.v;
    Vec3 n = t.n[0] * w + t.n[1] * hit.u + t.n[2] * hit.v;
    const double len = length(n);
    if (len > 0) return n / len;
    return normalize(cross(t.p[1] - t.p[0], t.p[2] - t.p[0]));
}

double Bvh::albedo(const Hit& hit) const {
    const BvhTriangle& t = triangles_[hit.triangle];
    return t.albedo[0] * (1.0 - hit.u - hit.v) + t.albedo[1] * hit.u + t.albedo[2] * hit.v;
}

std::vector<BvhTriangle> room_triangles(const Room& room) {
    const double x = room.width * 0.5, y = room.depth * 0.5, z = room.height;
    struct Face { std::array<Vec3, 4> q; Vec3 n; };
    const Face faces[6] = {
        {{Vec3{-x, -y, 0}, {x, -y, 0}, {x, y, 0}, {-x, y, 0}}, {0, 0, 1}},    // floor
        {{Vec3{-x, -y, z}, {-x, y, z}, {x, y, z}, {x, -y, z}}, {0, 0, -1}},   // ceiling
        {{Vec3{-x, -y, 0}, {-x, y, 0}, {-x, y, z}, {-x, -y, z}}, {1, 0, 0}},  // -x wall
        {{Vec3{x, -y, 0}, {x, -y, z}, {x, y, z}, {x, y, 0}}, {-1, 0, 0}},     // +x wall
        {{Vec3{-x, -y, 0}, {-x, -y, z}, {x, -y, z}, {x, -y, 0}}, {0, 1, 0}},  // -y wall
        {{Vec3{-x, y, 0}, {x, y, 0}, {x, y, z}, {-x, y, z}}, {0, -1, 0}},     // +y wall
    };
    std::vector<BvhTriangle> out;
    for (const Face& f : faces) {
        for (const auto& idx : {std::array{0, 1, 2}, std::array{0, 2, 3}}) {
            BvhTriangle t;
            t.p = {f.q[idx[0]], f.q[idx[1]], f.q[idx[2]]};
            t.n = {f.n, f.n, f.n};
            t.instance = 0;
            out.push_back(t);
        }
    }
    return out;
}

std::vector<BvhTriangle> scene_triangles(const SceneGraph& scene) {
    std::vector<BvhTriangle> out;
    if (scene.room.enabled) out = room_triangles(scene.room);
    for (const SceneObject& obj : scene.objects) {
        const Mesh& mesh = scene.meshes.at(obj.meshIndex);
        for (const auto& tri : mesh.triangles) {
            BvhTriangle t;
            for (int k = 0; k < 3; ++k) {
                t.p[k] = obj.pose.apply(mesh.vertices[tri[k]]);
                t.n[k] = obj.pose.apply_direction(mesh.vertexNormals[tri[k]]);
                t.albedo[k] = mesh.baseAlbedo[tri[k]];
            }
            t.instance = obj.objectId;
            out.push_back(t);
        }
    }
    return out;
}

Bvh build_bvh(const SceneGraph& scene) { return Bvh(scene_triangles(scene)); }

GBuffer::GBuffer(int w, int h)
    : width(w), height(h), X(h, w, 3), N(h, w, 3), instance(h, w, 1, -1), baseAlbedo(h, w, 1), valid(h, w, 1) {}

std::size_t GBuffer::valid_count() const {
    return static_cast<std::size_t>(std::count(valid.storage().begin(), valid.storage().end(), std::uint8_t{1}));
}

Vec3 pixel_direction(const Intrinsics& k, int x, int y) {
    return {(x + 0.5 - k.cx) / k.fx, (y + 0.5 - k.cy) / k.fy, 1.0};
}

GBuffer raycast_gbuffer(const SceneGraph& scene, const Bvh& bvh, int width, int height) {
    if (width < 8 || height < 8) throw InvalidArgument("G-buffer resolution must be at least 8x8");
    GBuffer g(width, height);
    const Intrinsics k = scene.camera.intrinsics.scaled(width, height);
    const Pose& w2c = scene.worldToCamera;
    const Pose c2w = w2c.inverse();
    parallel_for(static_cast<std::size_t>(height), [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < width; ++x) {
            const Vec3 dirCam = pixel_direction(k, x, y);
            const Ray ray{c2w.translation, c2w.apply_direction(dirCam)};
            const auto hit = bvh.intersect(ray, 0.0, std::numeric_limits<double>::infinity());
            if (!hit) continue;
            const Vec3 X = dirCam * hit->t;
            Vec3 n = w2c.apply_direction(bvh.shading_normal(*hit));
            if (dot(n, dirCam) > 0) n = -n;
            for (int c = 0; c < 3; ++c) {
                g.X.at(y, x, c) = static_cast<float>(X[c]);
                g.N.at(y, x, c) = static_cast<float>(n[c]);
            }
            g.instance.at(y, x) = bvh.triangles()[hit->triangle].instance;
            g.baseAlbedo.at(y, x) = static_cast<float>(bvh.albedo(*hit));
            g.valid.at(y, x) = 1;
        }
    });
    return g;
}

}  // namespace pndr
