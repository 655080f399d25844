#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <span>
#include <string_view>
#include <vector>

#include "pndr/error.hpp"
#include "pndr/math.hpp"

namespace pndr {

/// Triangle mesh in object space, meters. `baseAlbedo` is the decolorized
/// (grayscale) per-vertex albedo the material sampler multiplies into.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<Vec3> vertexNormals;
    std::vector<double> baseAlbedo;
    double boundingRadius = 0;

    Vec3 centroid() const;
    /// Throws InvalidArgument when an invariant is violated.
    void validate() const;
    bool operator==(const Mesh&) const = default;
};

enum class PrimitiveKind { Cube, Icosphere, Cylinder, Plane };

struct PrimitiveParams {
    double size = 1.0;    // cube edge, sphere/cylinder diameter, plane side
    int subdivision = 0;  // icosphere levels; cylinder uses 8 * 2^s segments
};

Mesh make_primitive(PrimitiveKind kind, const PrimitiveParams& params = {});

/// Non-uniform scale about the object origin; normals follow the inverse transpose.
Mesh scale_mesh(const Mesh& mesh, const Vec3& factors);

/// Parses the `v` / `vn` / `f` subset of Wavefront OBJ (1-based or negative
/// indices). `v x y z r g b` supplies a per-vertex color, decolorized with
/// Rec. 709 luminance weights.
Mesh load_obj(std::istream& in);
Mesh load_obj(std::string_view text);

double decolorize(double r, double g, double b);

/// Interior of an axis-aligned box room. The floor is z = 0 and the room is
/// centered on the z axis; the scene center is the floor center.
struct Room {
    double width = 4.0;   // x extent
    double depth = 4.0;   // y extent
    double height = 3.0;  // z extent
    bool enabled = true;  // walls, floor, ceiling present as instance 0
    bool operator==(const Room&) const = default;
};

/// Pinhole intrinsics in pixels; camera looks down +z, +x right, +y down.
struct Intrinsics {
    double fx = 64, fy = 64, cx = 32, cy = 32;
    int width = 64, height = 64;

    /// fx = fy = image height, principal point at the image center.
    static Intrinsics canonical(int width, int height);
    Intrinsics scaled(int newWidth, int newHeight) const;
    bool operator==(const Intrinsics&) const = default;
};

struct Camera {
    Intrinsics intrinsics;
    Pose pose;  // scene -> camera
    bool operator==(const Camera&) const = default;
};

struct SceneObject {
    int meshIndex = 0;
    Pose pose;  // object -> scene
    int objectId = 1;
    bool operator==(const SceneObject&) const = default;
};

struct SceneGraph {
    Room room;
    std::vector<Mesh> meshes;
    std::vector<SceneObject> objects;
    Camera camera;
    Pose worldToCamera;
    std::int64_t sceneId = 0;

    Vec3 sphere_center(const SceneObject& o) const;
    double sphere_radius(const SceneObject& o) const;
    /// Object ids plus 0 for the room when present, ascending.
    std::vector<int> instance_ids() const;
    bool operator==(const SceneGraph&) const = default;
};

struct PlacementError : Error {
    explicit PlacementError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct PlacementOptions {
    int maxAttempts = 1000;
    bool fullRotation = false;
    /// Half-size of the square floor region object centers may occupy;
    /// <= 0 means the whole room.
    double floorExtent = 0.0;
    int width = 64;
    int height = 64;
    double cameraDistance = 2.0;
    double cameraElevationDeg = 45.0;
    std::int64_t sceneId = 0;
};

/// Rejection-samples `count` collision-free placements resting on the floor.
/// Pure function of its arguments.
SceneGraph place_objects(std::span<const Mesh> meshes, const Room& room, int count, std::uint64_t seed,
                         const PlacementOptions& options = {});

/// Camera on the fixed-elevation arc around the scene center, azimuth drawn from `seed`.
Camera sample_camera(std::uint64_t seed, int width, int height, double distance, double elevationDeg);

/// Number of overlapping bounding-sphere pairs, by exhaustive pairwise test.
int count_sphere_overlaps(const SceneGraph& scene);

/// True when every bounding sphere lies within the walls, under the ceiling,
/// and has its center above the floor (meshes rest on the floor, so the sphere
/// may dip below it).
bool spheres_inside_room(const SceneGraph& scene);

}  // namespace pndr
