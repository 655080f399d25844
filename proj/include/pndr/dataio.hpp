#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pndr/autodiff.hpp"
#include "pndr/gbuffer.hpp"
#include "pndr/metrics.hpp"
#include "pndr/oracle.hpp"
#include "pndr/randomize.hpp"
#include "pndr/rendernet.hpp"
#include "pndr/scenegen.hpp"

namespace pndr {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// Tensor files -----------------------------------------------------------------

enum class DType : std::uint32_t { F32 = 1, U8 = 2, I32 = 3 };

std::size_t dtype_size(DType t);

/// Shape plus little-endian payload bytes.
struct TensorRecord {
    DType dtype = DType::F32;
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> payload;

    std::size_t element_count() const;
    bool operator==(const TensorRecord&) const = default;
};

TensorRecord to_record(const ImageF& image);
TensorRecord to_record(const ImageI& image);
TensorRecord to_record(const Mask& image);
TensorRecord to_record(const ad::Tensor<float>& tensor);
/// Rank-3 [H, W, C] records to images; throws IoError on dtype or rank mismatch.
ImageF image_f32(const TensorRecord& r);
ImageI image_i32(const TensorRecord& r);
Mask image_u8(const TensorRecord& r);
ad::Tensor<float> tensor_f32(const TensorRecord& r);

void write_tensor(std::ostream& out, const TensorRecord& record);
/// `source` names the stream in error messages.
TensorRecord read_tensor(std::istream& in, const std::string& source);
void save_tensor(const fs::path& path, const TensorRecord& record);
TensorRecord load_tensor(const fs::path& path);

// Buffer groups: one tensor file per field inside a directory -----------------

void save_gbuffer(const fs::path& dir, const GBuffer& g);
GBuffer load_gbuffer(const fs::path& dir);
void save_material_maps(const fs::path& dir, const MaterialMaps& m);
MaterialMaps load_material_maps(const fs::path& dir);
void save_light_maps(const fs::path& dir, const LightMaps& l);
LightMaps load_light_maps(const fs::path& dir);
void save_light_buffers(const fs::path& dir, const LightBuffers& b);
LightBuffers load_light_buffers(const fs::path& dir);

/// File names a group directory must contain.
std::vector<std::string> gbuffer_files();
std::vector<std::string> material_map_files();
std::vector<std::string> light_map_files();
std::vector<std::string> light_buffer_files();

// PNG ------------------------------------------------------------------------

/// 8-bit PNG (gray for 1 channel, RGB for 3); each value maps to floor(v * 255 + 0.5), clamped to [0, 255].
void save_png(const ImageF& image, const fs::path& path);
/// Decodes to 3 channels in [0, 1] (gray is replicated, alpha dropped).
ImageF load_png(const fs::path& path);

// JSON -------------------------------------------------------------------------

Json to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);
Json to_json(const Pose& p);
Pose pose_from_json(const Json& j);
Json to_json(const Mesh& m);
Mesh mesh_from_json(const Json& j);
Json to_json(const SceneGraph& s);
SceneGraph scene_from_json(const Json& j);
Json to_json(const LightSample& l);
LightSample light_from_json(const Json& j);
Json to_json(const MaterialSample& m);
MaterialSample material_from_json(const Json& j);
Json to_json(const MetricReport& r);

/// Stable two-space indentation with a trailing newline.
void save_json(const fs::path& path, const Json& j);
Json load_json(const fs::path& path);

void save_scene(const fs::path& path, const SceneGraph& scene);
SceneGraph load_scene(const fs::path& path);

// Manifest ---------------------------------------------------------------------

/// One randomization. Paths are relative to the manifest's directory; empty
/// paths mark stages that have not been produced yet.
struct ManifestSample {
    std::int64_t sceneId = 0;
    std::uint64_t lightSeed = 0;
    std::uint64_t materialSeed = 0;
    std::string scene;
    std::string gbuffer;
    std::string materialMaps;
    std::string lightMaps;
    std::string lightBuffers;
    std::string ldrPreview;
    LightSample light;
    std::vector<MaterialSample> materials;
    bool operator==(const ManifestSample&) const = default;
};

struct Manifest {
    std::vector<ManifestSample> samples;
    bool operator==(const Manifest&) const = default;
};

/// Reported when manifest entries point at files that do not exist.
struct ManifestError : Error {
    ManifestError(const std::string& what, std::vector<std::string> missing)
        : Error(ErrorKind::Io, what), missingPaths(std::move(missing)) {}
    std::vector<std::string> missingPaths;
};

Json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const Json& j);
void write_manifest(const fs::path& path, const Manifest& m);
/// Parses and, when `validate` is set, checks that every referenced path exists
/// and that each sample's sceneId matches its scene file.
Manifest read_manifest(const fs::path& path, bool validate = true);
/// Missing files for the manifest stored at `manifestPath`, in sample order.
std::vector<std::string> missing_paths(const Manifest& m, const fs::path& manifestPath);

// Checkpoints and logs -----------------------------------------------------------

void save_checkpoint(const fs::path& path, const NetParams& params);
NetParams load_checkpoint(const fs::path& path);

/// `epoch,meanLoss` rows with 1-based epochs.
void write_loss_csv(const fs::path& path, const std::vector<double>& epochLoss);
std::vector<double> read_loss_csv(const fs::path& path);

/// Header row and value row for a metric report.
std::string metric_csv_header(const MetricReport& r);
std::string metric_csv_row(const MetricReport& r);

// Run directory ----------------------------------------------------------------------

/// The explicit flag if given, else $PNDR_RUN_DIR, else the working directory.
fs::path resolve_run_dir(const std::optional<std::string>& flag);
/// Absolute paths pass through; relative ones are taken against the run directory.
fs::path run_path(const fs::path& runDir, const std::string& p);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace pndr
