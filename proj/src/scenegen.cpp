#include "pndr/scenegen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>

#include "pndr/rng.hpp"

namespace pndr {

Vec3 Mesh::centroid() const {
    Vec3 c;
    if (vertices.empty()) return c;
    for (const Vec3& v : vertices) c += v;
    return c / static_cast<double>(vertices.size());
}

void Mesh::validate() const {
    if (vertexNormals.size() != vertices.size() || baseAlbedo.size() != vertices.size()) {
        throw InvalidArgument("mesh attribute arrays must match the vertex count");
    }
    for (const auto& tri : triangles) {
        for (std::uint32_t i : tri) {
            if (i >= vertices.size()) throw InvalidArgument("triangle index out of range");
        }
    }
    for (const Vec3& n : vertexNormals) {
        if (std::abs(length(n) - 1.0) > 1e-6) throw InvalidArgument("vertex normal is not unit length");
    }
    for (double a : baseAlbedo) {
        if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("base albedo outside [0,1]");
    }
    const Vec3 c = centroid();
    for (const Vec3& v : vertices) {
        if (length(v - c) > boundingRadius + 1e-9) throw InvalidArgument("bounding radius too small");
    }
}

namespace {

double max_distance_from(const std::vector<Vec3>& vertices, const Vec3& c) {
    double r = 0;
    for (const Vec3& v : vertices) r = std::max(r, length(v - c));
    return r;
}

void finish(Mesh& mesh) {
    mesh.baseAlbedo.assign(mesh.vertices.size(), 1.0);
    mesh.boundingRadius = max_distance_from(mesh.vertices, mesh.centroid());
}

// Orients every triangle of a mesh that is star-shaped around the origin outward.
void orient_outward(Mesh& mesh) {
    for (auto& tri : mesh.triangles) {
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        const Vec3 center = (a + b + c) / 3.0;
        if (dot(cross(b - a, c - a), center) < 0) std::swap(tri[1], tri[2]);
    }
}

Mesh make_cube(double size) {
    const double h = size * 0.5;
    Mesh mesh;
    for (int i = 0; i < 8; ++i) {
        mesh.vertices.push_back({(i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h});
    }
    // Two triangles per face; indices use the bit layout above.
    mesh.triangles = {{0, 2, 4}, {2, 6, 4}, {1, 5, 3}, {3, 5, 7}, {0, 4, 1}, {1, 4, 5},
                      {2, 3, 6}, {3, 7, 6}, {0, 1, 2}, {1, 3, 2}, {4, 6, 5}, {5, 6, 7}};
    orient_outward(mesh);
    for (const Vec3& v : mesh.vertices) mesh.vertexNormals.push_back(normalize(v));
    finish(mesh);
    return mesh;
}

Mesh make_icosphere(double size, int subdivision) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                               {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& v : verts) v = normalize(v);
    std::vector<std::array<std::uint32_t, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (int s = 0; s < subdivision; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it = midpoints.find(key);
            if (it != midpoints.end()) return it->second;
            verts.push_back(normalize(verts[a] + verts[b]));
            const auto idx = static_cast<std::uint32_t>(verts.size() - 1);
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const std::uint32_t ab = midpoint(f[0], f[1]);
            const std::uint32_t bc = midpoint(f[1], f[2]);
            const std::uint32_t ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    Mesh mesh;
    const double radius = size * 0.5;
    for (const Vec3& v : verts) {
        mesh.vertices.push_back(v * radius);
        mesh.vertexNormals.push_back(v);
    }
    mesh.triangles = std::move(faces);
    orient_outward(mesh);
    finish(mesh);
    // Recompute against the exact unit directions so the radius bound is tight.
    mesh.boundingRadius = max_distance_from(mesh.vertices, mesh.centroid());
    return mesh;
}

Mesh make_cylinder(double size, int subdivision) {
    const int segments = 8 << subdivision;
    const double r = size * 0.5, h = size * 0.5;
    Mesh mesh;
    for (int ring = 0; ring < 2; ++ring) {
        const double z = ring == 0 ? -h : h;
        for (int i = 0; i < segments; ++i) {
            const double a = 2.0 * kPi * i / segments;
            mesh.vertices.push_back({r * std::cos(a), r * std::sin(a), z});
            mesh.vertexNormals.push_back(normalize(Vec3{std::cos(a), std::sin(a), ring == 0 ? -1.0 : 1.0}));
        }
    }
    const auto bottom = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back({0, 0, -h});
    mesh.vertexNormals.push_back({0, 0, -1});
    const auto top = bottom + 1;
    mesh.vertices.push_back({0, 0, h});
    mesh.vertexNormals.push_back({0, 0, 1});
    const auto n = static_cast<std::uint32_t>(segments);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t j = (i + 1) % n;
        mesh.triangles.push_back({i, j, n + i});
        mesh.triangles.push_back({j, n + j, n + i});
        mesh.triangles.push_back({bottom, j, i});
        mesh.triangles.push_back({top, n + i, n + j});
    }
    orient_outward(mesh);
    finish(mesh);
    return mesh;
}

Mesh make_plane(double size) {
    const double h = size * 0.5;
    Mesh mesh;
    mesh.vertices = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
    mesh.vertexNormals.assign(4, Vec3{0, 0, 1});
    mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
    finish(mesh);
    return mesh;
}

}  // namespace

Mesh make_primitive(PrimitiveKind kind, const PrimitiveParams& params) {
    if (!(params.size > 0.0) || !std::isfinite(params.size)) {
        throw InvalidArgument("primitive size must be positive");
    }
    if (params.subdivision < 0 || params.subdivision > 4) {
        throw InvalidArgument("subdivision must be in [0, 4]");
    }
    switch (kind) {
        case PrimitiveKind::Cube: return make_cube(params.size);
        case PrimitiveKind::Icosphere: return make_icosphere(params.size, params.subdivision);
        case PrimitiveKind::Cylinder: return make_cylinder(params.size, params.subdivision);
        case PrimitiveKind::Plane: return make_plane(params.size);
    }
    throw InvalidArgument("unknown primitive kind");
}

Mesh scale_mesh(const Mesh& mesh, const Vec3& factors) {
    if (!(factors.x > 0 && factors.y > 0 && factors.z > 0)) throw InvalidArgument("scale factors must be positive");
    Mesh out = mesh;
    for (Vec3& v : out.vertices) v = {v.x * factors.x, v.y * factors.y, v.z * factors.z};
    for (Vec3& n : out.vertexNormals) n = normalize(Vec3{n.x / factors.x, n.y / factors.y, n.z / factors.z});
    out.boundingRadius = max_distance_from(out.vertices, out.centroid());
    return out;
}

double decolorize(double r, double g, double b) {
    return std::clamp(0.2126 * r + 0.7152 * g + 0.0722 * b, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// OBJ ingestion

namespace {

double parse_double(std::string_view token, int line) {
    double value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) {
        throw ParseError("malformed number '" + std::string(token) + "'", line);
    }
    return value;
}

long resolve_index(std::string_view token, std::size_t count, int line) {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || value == 0) {
        throw ParseError("malformed index '" + std::string(token) + "'", line);
    }
    const long idx = value > 0 ? value - 1 : static_cast<long>(count) + value;
    if (idx < 0 || idx >= static_cast<long>(count)) {
        throw ParseError("index " + std::string(token) + " out of range", line);
    }
    return idx;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace

Mesh load_obj(std::istream& in) {
    std::vector<Vec3> positions;
    std::vector<double> albedo;
    std::vector<Vec3> normals;
    struct Corner { long v; long n; };
    std::vector<std::array<Corner, 3>> faces;

    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto tokens = split_ws(raw);
        if (tokens.empty() || tokens[0].starts_with('#')) continue;
        const std::string_view tag = tokens[0];
        if (tag == "v") {
            if (tokens.size() < 4) throw ParseError("vertex needs three coordinates", line);
            positions.push_back({parse_double(tokens[1], line), parse_double(tokens[2], line),
                                 parse_double(tokens[3], line)});
            if (tokens.size() >= 7) {
                albedo.push_back(decolorize(parse_double(tokens[4], line), parse_double(tokens[5], line),
                                            parse_double(tokens[6], line)));
            } else {
                albedo.push_back(1.0);
            }
        } else if (tag == "vn") {
            if (tokens.size() < 4) throw ParseError("normal needs three components", line);
            const Vec3 n{parse_double(tokens[1], line), parse_double(tokens[2], line), parse_double(tokens[3], line)};
            if (length(n) == 0.0) throw ParseError("zero-length normal", line);
            normals.push_back(normalize(n));
        } else if (tag == "f") {
            if (tokens.size() != 4) {
                throw ParseError("non-triangular face with " + std::to_string(tokens.size() - 1) + " vertices", line);
            }
            std::array<Corner, 3> face{};
            for (int k = 0; k < 3; ++k) {
                const std::string_view tok = tokens[k + 1];
                const auto s1 = tok.find('/');
                const std::string_view vtok = tok.substr(0, s1);
                face[k].v = resolve_index(vtok, positions.size(), line);
                face[k].n = -1;
                if (s1 != std::string_view::npos) {
                    const auto s2 = tok.find('/', s1 + 1);
                    if (s2 != std::string_view::npos && s2 + 1 < tok.size()) {
                        face[k].n = resolve_index(tok.substr(s2 + 1), normals.size(), line);
                    }
                }
            }
            faces.push_back(face);
        }
        // Other records (vt, o, g, s, usemtl, mtllib) carry nothing we use.
    }
    if (positions.empty()) throw ParseError("no vertices", line);

    // Area-weighted face normals accumulated per position.
    std::vector<Vec3> computed(positions.size());
    for (const auto& f : faces) {
        const Vec3 n = cross(positions[f[1].v] - positions[f[0].v], positions[f[2].v] - positions[f[0].v]);
        for (const Corner& c : f) computed[c.v] += n;
    }

    Mesh mesh;
    std::map<std::pair<long, long>, std::uint32_t> remap;
    auto vertex_for = [&](const Corner& c) {
        const auto key = std::make_pair(c.v, c.n);
        auto it = remap.find(key);
        if (it != remap.end()) return it->second;
        const auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(positions[c.v]);
        mesh.baseAlbedo.push_back(albedo[c.v]);
        Vec3 n = c.n >= 0 ? normals[c.n] : computed[c.v];
        n = length(n) > 0 ? normalize(n) : Vec3{0, 0, 1};
        mesh.vertexNormals.push_back(n);
        remap.emplace(key, idx);
        return idx;
    };
    for (const auto& f : faces) {
        mesh.triangles.push_back({vertex_for(f[0]), vertex_for(f[1]), vertex_for(f[2])});
    }
    // Keep unreferenced vertices out; a face-less file still yields its points.
    if (faces.empty()) {
        for (std::size_t i = 0; i < positions.size(); ++i) vertex_for({static_cast<long>(i), -1});
    }
    mesh.boundingRadius = max_distance_from(mesh.vertices, mesh.centroid());
    return mesh;
}

Mesh load_obj(std::string_view text) {
    std::istringstream in{std::string(text)};
    return load_obj(in);
}

// ---------------------------------------------------------------------------
// Scene placement

Intrinsics Intrinsics::canonical(int width, int height) {
    return {static_cast<double>(height), static_cast<double>(height), width * 0.5, height * 0.5, width, height};
}

Intrinsics Intrinsics::scaled(int newWidth, int newHeight) const {
    const double sx = static_cast<double>(newWidth) / width;
    const double sy = static_cast<double>(newHeight) / height;
    return {fx * sx, fy * sy, cx * sx, cy * sy, newWidth, newHeight};
}

Vec3 SceneGraph::sphere_center(const SceneObject& o) const {
    return o.pose.apply(meshes.at(o.meshIndex).centroid());
}

double SceneGraph::sphere_radius(const SceneObject& o) const { return meshes.at(o.meshIndex).boundingRadius; }

std::vector<int> SceneGraph::instance_ids() const {
    std::vector<int> ids;
    if (room.enabled) ids.push_back(0);
    for (const auto& o : objects) ids.push_back(o.objectId);
    std::sort(ids.begin(), ids.end());
    return ids;
}

namespace {

Mat3 random_rotation(CounterRng& rng) {
    // Uniform unit quaternion (Shoemake).
    const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
    const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
    const double qx = a * std::sin(2 * kPi * u2), qy = a * std::cos(2 * kPi * u2);
    const double qz = b * std::sin(2 * kPi * u3), qw = b * std::cos(2 * kPi * u3);
    Mat3 r;
    r.m = {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw),     2 * (qx * qz + qy * qw),
           2 * (qx * qy + qz * qw),     1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw),
           2 * (qx * qz - qy * qw),     2 * (qy * qz + qx * qw),     1 - 2 * (qx * qx + qy * qy)};
    return r;
}

}  // namespace

Camera sample_camera(std::uint64_t seed, int width, int height, double distance, double elevationDeg) {
    const double azimuth = 2.0 * kPi * uniform01(seed, static_cast<std::uint64_t>(Stream::Camera), 0);
    const double el = elevationDeg * kPi / 180.0;
    const Vec3 eye{distance * std::cos(el) * std::cos(azimuth), distance * std::cos(el) * std::sin(azimuth),
                   distance * std::sin(el)};
    return {Intrinsics::canonical(width, height), look_at(eye, {0, 0, 0}, {0, 0, 1})};
}

SceneGraph place_objects(std::span<const Mesh> meshes, const Room& room, int count, std::uint64_t seed,
                         const PlacementOptions& options) {
    if (count < 1) throw InvalidArgument("object count must be >= 1");
    if (meshes.empty()) throw InvalidArgument("at least one mesh is required");
    if (!(room.width > 0 && room.depth > 0 && room.height > 0)) throw InvalidArgument("room dimensions must be positive");
    if (options.width < 8 || options.height < 8) throw InvalidArgument("resolution must be at least 8x8");

    SceneGraph scene;
    scene.room = room;
    scene.sceneId = options.sceneId;
    scene.meshes.assign(meshes.begin(), meshes.end());
    scene.camera = sample_camera(seed, options.width, options.height, options.cameraDistance,
                                 options.cameraElevationDeg);
    scene.worldToCamera = scene.camera.pose;

    CounterRng rng(seed, Stream::Placement);
    for (int k = 0; k < count; ++k) {
        const int meshIndex = static_cast<int>(rng.below(meshes.size()));
        const Mesh& mesh = meshes[meshIndex];
        const Vec3 centroid = mesh.centroid();
        const double r = mesh.boundingRadius;
        bool placed = false;
        for (int attempt = 0; attempt < options.maxAttempts && !placed; ++attempt) {
            const Mat3 rot = options.fullRotation ? random_rotation(rng) : Mat3::rotation_z(2.0 * kPi * rng.uniform());
            double minZ = std::numeric_limits<double>::infinity();
            for (const Vec3& v : mesh.vertices) minZ = std::min(minZ, (rot * v).z);
            const Vec3 c = rot * centroid;
            double ex = room.width * 0.5 - r, ey = room.depth * 0.5 - r;
            if (options.floorExtent > 0) {
                ex = std::min(ex, options.floorExtent);
                ey = std::min(ey, options.floorExtent);
            }
            const double ux = rng.uniform(), uy = rng.uniform();
            if (ex < 0 || ey < 0) continue;
            const Vec3 center{-ex + 2 * ex * ux, -ey + 2 * ey * uy, c.z - minZ};
            if (center.z + r > room.height) continue;
            bool clear = true;
            for (const auto& other : scene.objects) {
                const double d = length(center - scene.sphere_center(other));
                if (d <= r + scene.sphere_radius(other)) {
                    clear = false;
                    break;
                }
            }
            if (!clear) continue;
            scene.objects.push_back({meshIndex, Pose{rot, center - c}, k + 1});
            placed = true;
        }
        if (!placed) {
            throw PlacementError("could not place object " + std::to_string(k + 1) + " after " +
                                 std::to_string(options.maxAttempts) + " attempts");
        }
    }
    return scene;
}

int count_sphere_overlaps(const SceneGraph& scene) {
    int overlaps = 0;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
            const double d = length(scene.sphere_center(scene.objects[i]) - scene.sphere_center(scene.objects[j]));
            if (d <= scene.sphere_radius(scene.objects[i]) + scene.sphere_radius(scene.objects[j])) ++overlaps;
        }
    }
    return overlaps;
}

bool spheres_inside_room(const SceneGraph& scene) {
    const Room& room = scene.room;
    for (const auto& o : scene.objects) {
        const Vec3 c = scene.sphere_center(o);
        const double r = scene.sphere_radius(o);
        if (std::abs(c.x) + r > room.width * 0.5 + 1e-9) return false;
        if (std::abs(c.y) + r > room.depth * 0.5 + 1e-9) return false;
        if (c.z + r > room.height + 1e-9 || c.z < 0) return false;
    }
    return true;
}

}  // namespace pndr
