#include "pndr/dataio.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace pndr {

static_assert(std::endian::native == std::endian::little, "tensor files are written with host byte order");

namespace {

constexpr char kTensorMagic[8] = {'P', 'N', 'D', 'R', 'T', 'N', 'S', 'R'};
constexpr char kCheckpointMagic[8] = {'P', 'N', 'D', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kTensorVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& source, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError(source + ": truncated " + what);
    return v;
}

template <class T>
TensorRecord make_record(DType dtype, std::vector<std::uint64_t> dims, std::span<const T> values) {
    TensorRecord r{dtype, std::move(dims), std::vector<std::uint8_t>(values.size_bytes())};
    if (!values.empty()) std::memcpy(r.payload.data(), values.data(), values.size_bytes());
    return r;
}

template <class T>
Image<T> record_to_image(const TensorRecord& r, DType expected) {
    if (r.dtype != expected) throw IoError("tensor has unexpected dtype");
    if (r.dims.size() != 3) throw IoError("tensor is not an [H, W, C] image");
    Image<T> img(static_cast<int>(r.dims[0]), static_cast<int>(r.dims[1]), static_cast<int>(r.dims[2]));
    if (img.size() * sizeof(T) != r.payload.size()) throw IoError("tensor payload does not match its shape");
    if (!r.payload.empty()) std::memcpy(img.storage().data(), r.payload.data(), r.payload.size());
    return img;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::binary) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::binary) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

void close_checked(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

template <class F>
auto json_field(const Json& j, const char* key, F convert) {
    try {
        return convert(j.at(key));
    } catch (const Json::exception& e) {
        throw ParseError(std::string("field '") + key + "': " + e.what(), 0);
    }
}

template <class T>
T json_get(const Json& j, const char* key) {
    return json_field(j, key, [](const Json& v) { return v.get<T>(); });
}

}  // namespace

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::F32: return 4;
        case DType::U8: return 1;
        case DType::I32: return 4;
    }
    throw IoError("unknown dtype code " + std::to_string(static_cast<std::uint32_t>(t)));
}

std::size_t TensorRecord::element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return static_cast<std::size_t>(n);
}

TensorRecord to_record(const ImageF& img) {
    return make_record<float>(DType::F32, {std::uint64_t(img.height()), std::uint64_t(img.width()), std::uint64_t(img.channels())},
                              img.data());
}

TensorRecord to_record(const ImageI& img) {
    return make_record<std::int32_t>(DType::I32,
                                     {std::uint64_t(img.height()), std::uint64_t(img.width()), std::uint64_t(img.channels())},
                                     img.data());
}

TensorRecord to_record(const Mask& img) {
    return make_record<std::uint8_t>(DType::U8,
                                     {std::uint64_t(img.height()), std::uint64_t(img.width()), std::uint64_t(img.channels())},
                                     img.data());
}

TensorRecord to_record(const ad::Tensor<float>& t) {
    std::vector<std::uint64_t> dims(t.shape.begin(), t.shape.end());
    return make_record<float>(DType::F32, std::move(dims), t.data);
}

ImageF image_f32(const TensorRecord& r) { return record_to_image<float>(r, DType::F32); }
ImageI image_i32(const TensorRecord& r) { return record_to_image<std::int32_t>(r, DType::I32); }
Mask image_u8(const TensorRecord& r) { return record_to_image<std::uint8_t>(r, DType::U8); }

ad::Tensor<float> tensor_f32(const TensorRecord& r) {
    if (r.dtype != DType::F32) throw IoError("tensor has unexpected dtype");
    std::vector<int> shape(r.dims.begin(), r.dims.end());
    std::vector<float> data(r.element_count());
    if (data.size() * sizeof(float) != r.payload.size()) throw IoError("tensor payload does not match its shape");
    if (!data.empty()) std::memcpy(data.data(), r.payload.data(), r.payload.size());
    return ad::Tensor<float>(std::move(shape), std::move(data));
}

void write_tensor(std::ostream& out, const TensorRecord& r) {
    if (r.payload.size() != r.element_count() * dtype_size(r.dtype)) {
        throw InvalidArgument("tensor payload does not match its shape");
    }
    out.write(kTensorMagic, sizeof(kTensorMagic));
    put<std::uint32_t>(out, kTensorVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(r.payload.data()), static_cast<std::streamsize>(r.payload.size()));
}

TensorRecord read_tensor(std::istream& in, const std::string& source) {
    char magic[8];
    if (!in.read(magic, sizeof(magic))) throw IoError(source + ": truncated header");
    if (std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0) throw IoError(source + ": bad magic, not a tensor file");
    const auto version = get<std::uint32_t>(in, source, "header");
    if (version != kTensorVersion) throw IoError(source + ": unsupported tensor version " + std::to_string(version));
    TensorRecord r;
    r.dtype = static_cast<DType>(get<std::uint32_t>(in, source, "header"));
    const std::size_t elem = dtype_size(r.dtype);
    const auto ndim = get<std::uint32_t>(in, source, "header");
    if (ndim > 16) throw IoError(source + ": implausible rank " + std::to_string(ndim));
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        r.dims.push_back(get<std::uint64_t>(in, source, "dimensions"));
        count *= r.dims.back();
        if (r.dims.back() > kMaxElements || count > kMaxElements) throw IoError(source + ": implausible tensor size");
    }
    r.payload.resize(static_cast<std::size_t>(count) * elem);
    if (!in.read(reinterpret_cast<char*>(r.payload.data()), static_cast<std::streamsize>(r.payload.size()))) {
        throw IoError(source + ": truncated payload");
    }
    return r;
}

void save_tensor(const fs::path& path, const TensorRecord& record) {
    auto out = open_out(path);
    write_tensor(out, record);
    close_checked(out, path);
}

TensorRecord load_tensor(const fs::path& path) {
    auto in = open_in(path);
    return read_tensor(in, path.string());
}

// ---------------------------------------------------------------------------

std::vector<std::string> gbuffer_files() {
    return {"X.tensor", "N.tensor", "instance.tensor", "baseAlbedo.tensor", "valid.tensor"};
}
std::vector<std::string> material_map_files() { return {"A.tensor", "R.tensor", "S.tensor"}; }
std::vector<std::string> light_map_files() { return {"Ldir.tensor", "Ldist.tensor"}; }
std::vector<std::string> light_buffer_files() { return {"Ddir.tensor", "Dind.tensor", "Gdir.tensor", "Gind.tensor"}; }

void save_gbuffer(const fs::path& dir, const GBuffer& g) {
    save_tensor(dir / "X.tensor", to_record(g.X));
    save_tensor(dir / "N.tensor", to_record(g.N));
    save_tensor(dir / "instance.tensor", to_record(g.instance));
    save_tensor(dir / "baseAlbedo.tensor", to_record(g.baseAlbedo));
    save_tensor(dir / "valid.tensor", to_record(g.valid));
}

GBuffer load_gbuffer(const fs::path& dir) {
    GBuffer g;
    g.X = image_f32(load_tensor(dir / "X.tensor"));
    g.N = image_f32(load_tensor(dir / "N.tensor"));
    g.instance = image_i32(load_tensor(dir / "instance.tensor"));
    g.baseAlbedo = image_f32(load_tensor(dir / "baseAlbedo.tensor"));
    g.valid = image_u8(load_tensor(dir / "valid.tensor"));
    g.height = g.X.height();
    g.width = g.X.width();
    if (g.X.channels() != 3 || g.N.channels() != 3 || !g.N.same_extent(g.X) || !g.instance.same_extent(g.X) ||
        !g.baseAlbedo.same_extent(g.X) || !g.valid.same_extent(g.X)) {
        throw IoError(dir.string() + ": G-buffer fields have inconsistent shapes");
    }
    return g;
}

void save_material_maps(const fs::path& dir, const MaterialMaps& m) {
    save_tensor(dir / "A.tensor", to_record(m.A));
    save_tensor(dir / "R.tensor", to_record(m.R));
    save_tensor(dir / "S.tensor", to_record(m.S));
}

MaterialMaps load_material_maps(const fs::path& dir) {
    MaterialMaps m{image_f32(load_tensor(dir / "A.tensor")), image_f32(load_tensor(dir / "R.tensor")),
                   image_f32(load_tensor(dir / "S.tensor"))};
    if (!m.R.same_extent(m.A) || !m.S.same_extent(m.A)) throw IoError(dir.string() + ": material maps differ in size");
    return m;
}

void save_light_maps(const fs::path& dir, const LightMaps& l) {
    save_tensor(dir / "Ldir.tensor", to_record(l.Ldir));
    save_tensor(dir / "Ldist.tensor", to_record(l.Ldist));
}

LightMaps load_light_maps(const fs::path& dir) {
    LightMaps l{image_f32(load_tensor(dir / "Ldir.tensor")), image_f32(load_tensor(dir / "Ldist.tensor"))};
    if (!l.Ldist.same_extent(l.Ldir)) throw IoError(dir.string() + ": light maps differ in size");
    return l;
}

void save_light_buffers(const fs::path& dir, const LightBuffers& b) {
    save_tensor(dir / "Ddir.tensor", to_record(b.Ddir));
    save_tensor(dir / "Dind.tensor", to_record(b.Dind));
    save_tensor(dir / "Gdir.tensor", to_record(b.Gdir));
    save_tensor(dir / "Gind.tensor", to_record(b.Gind));
}

LightBuffers load_light_buffers(const fs::path& dir) {
    LightBuffers b;
    b.Ddir = image_f32(load_tensor(dir / "Ddir.tensor"));
    b.Dind = image_f32(load_tensor(dir / "Dind.tensor"));
    b.Gdir = image_f32(load_tensor(dir / "Gdir.tensor"));
    b.Gind = image_f32(load_tensor(dir / "Gind.tensor"));
    for (const ImageF* img : {&b.Dind, &b.Gdir, &b.Gind}) {
        if (!img->same_extent(b.Ddir) || img->channels() != 3) throw IoError(dir.string() + ": light buffers differ in shape");
    }
    return b;
}

// ---------------------------------------------------------------------------

void save_png(const ImageF& image, const fs::path& path) {
    const int c = image.channels();
    if (c != 1 && c != 3) throw InvalidArgument("save_png: expected 1 or 3 channels");
    if (image.height() < 1 || image.width() < 1) throw InvalidArgument("save_png: empty image");
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialization failed");
    }
    std::vector<png_byte> bytes(image.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::floor(static_cast<double>(image.data()[i]) * 255.0 + 0.5);
        bytes[i] = static_cast<png_byte>(std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 255.0));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
    for (int y = 0; y < image.height(); ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * image.width() * c;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing PNG '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, image.width(), image.height(), 8, c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageF load_png(const fs::path& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "rb"), &std::fclose);
    if (!fp) throw IoError("cannot open '" + path.string() + "' for reading");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialization failed");
    }
    std::vector<png_byte> bytes;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path.string() + "' is not a readable PNG");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const std::size_t rowBytes = png_get_rowbytes(png, info);
    bytes.resize(rowBytes * h);
    rows.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * rowBytes;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    if (rowBytes != static_cast<std::size_t>(w) * 3) throw IoError("'" + path.string() + "': unsupported PNG layout");
    ImageF img(h, w, 3);
    for (std::size_t i = 0; i < img.size(); ++i) img.storage()[i] = static_cast<float>(bytes[i] / 255.0);
    return img;
}

// ---------------------------------------------------------------------------

Json to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector", 0);
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json to_json(const Pose& p) {
    return {{"rotation", Json(std::vector<double>(p.rotation.m.begin(), p.rotation.m.end()))},
            {"translation", to_json(p.translation)}};
}

Pose pose_from_json(const Json& j) {
    Pose p;
    const auto r = json_get<std::vector<double>>(j, "rotation");
    if (r.size() != 9) throw ParseError("rotation must have 9 entries", 0);
    std::copy(r.begin(), r.end(), p.rotation.m.begin());
    p.translation = json_field(j, "translation", vec3_from_json);
    return p;
}

Json to_json(const Mesh& m) {
    Json verts = Json::array(), normals = Json::array(), tris = Json::array();
    for (const auto& v : m.vertices) verts.push_back(to_json(v));
    for (const auto& n : m.vertexNormals) normals.push_back(to_json(n));
    for (const auto& t : m.triangles) tris.push_back({t[0], t[1], t[2]});
    return {{"vertices", verts}, {"vertexNormals", normals}, {"triangles", tris},
            {"baseAlbedo", m.baseAlbedo}, {"boundingRadius", m.boundingRadius}};
}

Mesh mesh_from_json(const Json& j) {
    Mesh m;
    try {
        for (const auto& v : j.at("vertices")) m.vertices.push_back(vec3_from_json(v));
        for (const auto& n : j.at("vertexNormals")) m.vertexNormals.push_back(vec3_from_json(n));
        for (const auto& t : j.at("triangles")) m.triangles.push_back({t.at(0).get<std::uint32_t>(), t.at(1).get<std::uint32_t>(), t.at(2).get<std::uint32_t>()});
        m.baseAlbedo = j.at("baseAlbedo").get<std::vector<double>>();
        m.boundingRadius = j.at("boundingRadius").get<double>();
    } catch (const Json::exception& e) {
        throw ParseError(std::string("mesh: ") + e.what(), 0);
    }
    m.validate();
    return m;
}

Json to_json(const SceneGraph& s) {
    Json meshes = Json::array(), objects = Json::array();
    for (const auto& m : s.meshes) meshes.push_back(to_json(m));
    for (const auto& o : s.objects) {
        objects.push_back({{"meshIndex", o.meshIndex}, {"objectId", o.objectId}, {"pose", to_json(o.pose)}});
    }
    const auto& k = s.camera.intrinsics;
    return {{"sceneId", s.sceneId},
            {"room", {{"width", s.room.width}, {"depth", s.room.depth}, {"height", s.room.height}, {"enabled", s.room.enabled}}},
            {"camera",
             {{"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
              {"pose", to_json(s.camera.pose)}}},
            {"worldToCamera", to_json(s.worldToCamera)},
            {"meshes", meshes},
            {"objects", objects}};
}

SceneGraph scene_from_json(const Json& j) {
    SceneGraph s;
    try {
        s.sceneId = j.at("sceneId").get<std::int64_t>();
        const auto& r = j.at("room");
        s.room = {r.at("width").get<double>(), r.at("depth").get<double>(), r.at("height").get<double>(), r.at("enabled").get<bool>()};
        const auto& k = j.at("camera").at("intrinsics");
        s.camera.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                               k.at("cy").get<double>(), k.at("width").get<int>(), k.at("height").get<int>()};
        s.camera.pose = pose_from_json(j.at("camera").at("pose"));
        s.worldToCamera = pose_from_json(j.at("worldToCamera"));
        for (const auto& m : j.at("meshes")) s.meshes.push_back(mesh_from_json(m));
        for (const auto& o : j.at("objects")) {
            s.objects.push_back({o.at("meshIndex").get<int>(), pose_from_json(o.at("pose")), o.at("objectId").get<int>()});
        }
    } catch (const Json::exception& e) {
        throw ParseError(std::string("scene: ") + e.what(), 0);
    }
    for (const auto& o : s.objects) {
        if (o.meshIndex < 0 || o.meshIndex >= static_cast<int>(s.meshes.size())) {
            throw ParseError("scene: object " + std::to_string(o.objectId) + " references a missing mesh", 0);
        }
        if (o.objectId < 1) throw ParseError("scene: object ids must be >= 1", 0);
    }
    return s;
}

Json to_json(const LightSample& l) {
    return {{"positionScene", to_json(l.positionScene)}, {"positionCamera", to_json(l.positionCamera)}, {"intensity", l.intensity}};
}

LightSample light_from_json(const Json& j) {
    LightSample l;
    l.positionScene = json_field(j, "positionScene", vec3_from_json);
    l.positionCamera = json_field(j, "positionCamera", vec3_from_json);
    l.intensity = json_get<double>(j, "intensity");
    return l;
}

Json to_json(const MaterialSample& m) {
    return {{"objectId", m.objectId}, {"albedoRgb", to_json(m.albedoRgb)}, {"roughness", m.roughness}, {"specularity", m.specularity}};
}

MaterialSample material_from_json(const Json& j) {
    MaterialSample m;
    m.objectId = json_get<int>(j, "objectId");
    m.albedoRgb = json_field(j, "albedoRgb", vec3_from_json);
    m.roughness = json_get<double>(j, "roughness");
    m.specularity = json_get<double>(j, "specularity");
    return m;
}

Json to_json(const MetricReport& r) {
    return {{"metrics", r.values}, {"sampleCount", r.sampleCount}, {"config", r.config}};
}

void save_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json load_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

void save_scene(const fs::path& path, const SceneGraph& scene) { save_json(path, to_json(scene)); }
SceneGraph load_scene(const fs::path& path) { return scene_from_json(load_json(path)); }

// ---------------------------------------------------------------------------

Json manifest_to_json(const Manifest& m) {
    Json samples = Json::array();
    for (const auto& s : m.samples) {
        Json mats = Json::array();
        for (const auto& mat : s.materials) mats.push_back(to_json(mat));
        samples.push_back({{"sceneId", s.sceneId},
                           {"lightSeed", s.lightSeed},
                           {"materialSeed", s.materialSeed},
                           {"scene", s.scene},
                           {"gbuffer", s.gbuffer},
                           {"materialMaps", s.materialMaps},
                           {"lightMaps", s.lightMaps},
                           {"lightBuffers", s.lightBuffers},
                           {"ldrPreview", s.ldrPreview},
                           {"light", to_json(s.light)},
                           {"materials", mats}});
    }
    return {{"samples", samples}};
}

Manifest manifest_from_json(const Json& j) {
    Manifest m;
    try {
        for (const auto& s : j.at("samples")) {
            ManifestSample ms;
            ms.sceneId = s.at("sceneId").get<std::int64_t>();
            ms.lightSeed = s.at("lightSeed").get<std::uint64_t>();
            ms.materialSeed = s.at("materialSeed").get<std::uint64_t>();
            ms.scene = s.at("scene").get<std::string>();
            ms.gbuffer = s.at("gbuffer").get<std::string>();
            ms.materialMaps = s.at("materialMaps").get<std::string>();
            ms.lightMaps = s.at("lightMaps").get<std::string>();
            ms.lightBuffers = s.at("lightBuffers").get<std::string>();
            ms.ldrPreview = s.at("ldrPreview").get<std::string>();
            ms.light = light_from_json(s.at("light"));
            for (const auto& mat : s.at("materials")) ms.materials.push_back(material_from_json(mat));
            m.samples.push_back(std::move(ms));
        }
    } catch (const Json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what(), 0);
    }
    return m;
}

void write_manifest(const fs::path& path, const Manifest& m) { save_json(path, manifest_to_json(m)); }

std::vector<std::string> missing_paths(const Manifest& m, const fs::path& manifestPath) {
    const fs::path base = manifestPath.parent_path();
    std::vector<std::string> missing;
    auto check = [&](const std::string& rel, const std::vector<std::string>& files) {
        if (rel.empty()) return;
        const fs::path p = base / rel;
        if (files.empty()) {
            if (!fs::exists(p)) missing.push_back(rel);
            return;
        }
        for (const auto& f : files) {
            if (!fs::exists(p / f)) missing.push_back((fs::path(rel) / f).generic_string());
        }
    };
    for (const auto& s : m.samples) {
        check(s.scene, {});
        check(s.gbuffer, gbuffer_files());
        check(s.materialMaps, material_map_files());
        check(s.lightMaps, light_map_files());
        check(s.lightBuffers, light_buffer_files());
        check(s.ldrPreview, {});
    }
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    return missing;
}

Manifest read_manifest(const fs::path& path, bool validate) {
    Manifest m = manifest_from_json(load_json(path));
    if (!validate) return m;
    auto missing = missing_paths(m, path);
    if (!missing.empty()) {
        std::string msg = path.string() + ": missing files:";
        for (const auto& p : missing) msg += " " + p;
        throw ManifestError(msg, std::move(missing));
    }
    std::map<std::string, std::int64_t> sceneIds;
    for (const auto& s : m.samples) {
        if (s.scene.empty()) continue;
        auto it = sceneIds.find(s.scene);
        if (it == sceneIds.end()) {
            it = sceneIds.emplace(s.scene, json_get<std::int64_t>(load_json(path.parent_path() / s.scene), "sceneId")).first;
        }
        if (it->second != s.sceneId) {
            throw ConfigError(path.string() + ": sample sceneId " + std::to_string(s.sceneId) + " does not match " + s.scene);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const fs::path& path, const NetParams& params) {
    validate_params(params);
    auto out = open_out(path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    const auto& a = params.arch;
    for (int v : {a.levels, a.baseChannels, a.inChannels, a.outChannels, a.stemChannels, a.headChannels}) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_tensor(out, to_record(t.tensor));
    }
    close_checked(out, path);
}

NetParams load_checkpoint(const fs::path& path) {
    auto in = open_in(path);
    const std::string src = path.string();
    char magic[8];
    if (!in.read(magic, sizeof(magic))) throw IoError(src + ": truncated header");
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw IoError(src + ": bad magic, not a checkpoint");
    if (get<std::uint32_t>(in, src, "header") != kCheckpointVersion) throw IoError(src + ": unsupported checkpoint version");
    NetParams p;
    int* fields[] = {&p.arch.levels, &p.arch.baseChannels, &p.arch.inChannels, &p.arch.outChannels,
                     &p.arch.stemChannels, &p.arch.headChannels};
    for (int* f : fields) *f = static_cast<int>(get<std::uint32_t>(in, src, "architecture"));
    const auto count = get<std::uint32_t>(in, src, "header");
    if (count > 4096) throw IoError(src + ": implausible tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = get<std::uint32_t>(in, src, "tensor name");
        if (len > 256) throw IoError(src + ": implausible tensor name length");
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw IoError(src + ": truncated tensor name");
        p.tensors.push_back({name, tensor_f32(read_tensor(in, src))});
    }
    try {
        validate_params(p);
    } catch (const InvalidArgument& e) {
        throw IoError(src + ": " + e.what());
    }
    return p;
}

void write_loss_csv(const fs::path& path, const std::vector<double>& epochLoss) {
    std::ostringstream s;
    s << "epoch,meanLoss\n" << std::setprecision(17);
    for (std::size_t i = 0; i < epochLoss.size(); ++i) s << i + 1 << ',' << epochLoss[i] << '\n';
    write_text(path, s.str());
}

std::vector<double> read_loss_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    std::getline(in, line);
    if (line != "epoch,meanLoss") throw ParseError(path.string() + ": missing header", 1);
    std::vector<double> out;
    int lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(path.string() + ": expected two columns", lineNo);
        try {
            out.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ParseError(path.string() + ": bad number", lineNo);
        }
    }
    return out;
}

std::string metric_csv_header(const MetricReport& r) {
    std::string s;
    for (const auto& [k, v] : r.values) s += k + ",";
    return s + "sampleCount";
}

std::string metric_csv_row(const MetricReport& r) {
    std::ostringstream s;
    s << std::setprecision(10);
    for (const auto& [k, v] : r.values) s << v << ',';
    s << r.sampleCount;
    return s.str();
}

fs::path resolve_run_dir(const std::optional<std::string>& flag) {
    if (flag && !flag->empty()) return fs::path(*flag);
    if (const char* env = std::getenv("PNDR_RUN_DIR"); env && *env) return fs::path(env);
    return fs::current_path();
}

fs::path run_path(const fs::path& runDir, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : runDir / path;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    close_checked(out, path);
}

std::string read_text(const fs::path& path) {
    auto in = open_in(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace pndr
