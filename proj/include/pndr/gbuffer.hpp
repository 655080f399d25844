#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pndr/image.hpp"
#include "pndr/math.hpp"
#include "pndr/scenegen.hpp"

namespace pndr {

struct Ray {
    Vec3 origin;
    Vec3 direction;  // need not be unit length; hit distances are in units of |direction|
};

struct BvhTriangle {
    std::array<Vec3, 3> p;
    std::array<Vec3, 3> n;
    std::array<double, 3> albedo{1, 1, 1};
    int instance = 0;
};

struct Hit {
    double t = 0;
    int triangle = -1;  // index into Bvh::triangles
    double u = 0, v = 0;  // barycentrics of p[1], p[2]
};

/// Median-split bounding volume hierarchy over world-space triangles.
class Bvh {
public:
    static constexpr int kMaxLeafSize = 4;

    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;  // inner nodes
        int first = 0, count = 0;   // leaves: range into order()
        bool leaf() const { return count > 0; }
    };

    Bvh() = default;
    explicit Bvh(std::vector<BvhTriangle> triangles);

    const std::vector<BvhTriangle>& triangles() const { return triangles_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int>& order() const { return order_; }

    /// Nearest hit with t in (tMin, tMax); ties go to the lower triangle index.
    std::optional<Hit> intersect(const Ray& ray, double tMin, double tMax) const;
    /// Any hit with t in (tMin, tMax).
    bool occluded(const Ray& ray, double tMin, double tMax) const;
    /// Reference path: tests every triangle.
    std::optional<Hit> intersect_exhaustive(const Ray& ray, double tMin, double tMax) const;

    /// Interpolated world-space shading normal (unnormalized input, unit output).
    Vec3 shading_normal(const Hit& hit) const;
    double albedo(const Hit& hit) const;

private:
    int build(int first, int count);

    std::vector<BvhTriangle> triangles_;
    std::vector<Node> nodes_;
    std::vector<int> order_;
};

/// Möller-Trumbore; returns t and barycentrics when the ray crosses the triangle.
std::optional<Hit> intersect_triangle(const Ray& ray, const BvhTriangle& tri, double tMin, double tMax);

/// World-space triangles of the room box (instance 0, normals facing inward).
std::vector<BvhTriangle> room_triangles(const Room& room);
std::vector<BvhTriangle> scene_triangles(const SceneGraph& scene);
Bvh build_bvh(const SceneGraph& scene);

/// Per-pixel geometric buffers in camera space.
struct GBuffer {
    int width = 0, height = 0;
    ImageF X;           // 3 channels, meters
    ImageF N;           // 3 channels, unit, facing the camera
    ImageI instance;    // 0 room, >= 1 objects, -1 miss
    ImageF baseAlbedo;  // 1 channel
    Mask valid;         // 1 where instance >= 0

    GBuffer() = default;
    GBuffer(int width, int height);
    std::size_t valid_count() const;
    bool operator==(const GBuffer&) const = default;
};

/// Camera-space primary ray direction through the center of pixel (x, y), z = 1.
Vec3 pixel_direction(const Intrinsics& k, int x, int y);

GBuffer raycast_gbuffer(const SceneGraph& scene, const Bvh& bvh, int width, int height);

}  // namespace pndr
