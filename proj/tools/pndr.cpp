#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "json_config.hpp"
#include "pndr/compose.hpp"
#include "pndr/dataio.hpp"
#include "pndr/inverse.hpp"
#include "pndr/metrics.hpp"
#include "pndr/parallel.hpp"
#include "pndr/pipeline.hpp"
#include "pndr/rng.hpp"

using namespace pndr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Global {
    int threads = 0;
    std::optional<std::string> runDir;
    fs::path root;
    const CLI::App* app = nullptr;

    fs::path path(const std::string& p) const { return run_path(root, p); }

    /// Creates the output directory and echoes the effective configuration into it.
    fs::path prepare_out(const std::string& out) const {
        const fs::path dir = path(out);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
        write_text(dir / "config.json", app->config_to_str(true, false));
        return dir;
    }
};

std::string rel(const fs::path& p, const fs::path& base) { return fs::relative(p, base).generic_string(); }

void log(const std::string& msg) { std::cerr << msg << "\n"; }

std::vector<fs::path> scene_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("scene directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("scene_", 0) == 0 && e.path().extension() == ".json") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no scene_*.json files in '" + dir.string() + "'");
    return files;
}

/// Rewrites the manifest paths of `s`, stored relative to `from`, relative to `to`.
ManifestSample rebase(ManifestSample s, const fs::path& from, const fs::path& to) {
    for (std::string* p : {&s.scene, &s.gbuffer, &s.materialMaps, &s.lightMaps, &s.lightBuffers, &s.ldrPreview}) {
        if (!p->empty()) *p = rel(fs::absolute(from / *p), fs::absolute(to));
    }
    return s;
}

ImageF load_image(const fs::path& p) {
    if (p.extension() == ".png") return load_png(p);
    return image_f32(load_tensor(p));
}

ShadeConfig shade_config(int indirectSamples, int glossySamples, const std::string& indirect,
                         const std::string& diffuse, std::uint64_t seed) {
    ShadeConfig s;
    if (indirect != "on" && indirect != "off") throw ConfigError("indirect must be on or off");
    if (diffuse != "oren-nayar" && diffuse != "lambertian") {
        throw ConfigError("diffuse-model must be oren-nayar or lambertian");
    }
    s.indirectSamples = indirect == "on" ? indirectSamples : 0;
    s.indirectGlossySamples = indirect == "on" ? glossySamples : 0;
    s.diffuseModel = diffuse == "lambertian" ? DiffuseModel::Lambertian : DiffuseModel::OrenNayar;
    s.seed = seed;
    if (s.indirectSamples < 0 || s.indirectGlossySamples < 0) throw ConfigError("indirect-samples must be >= 0");
    return s;
}

// gen-scenes -------------------------------------------------------------------

struct GenScenes {
    int count = 1;
    int objects = 3;
    std::uint64_t seed = 0;
    std::int64_t firstId = 0;
    int resolution = 64;
    std::string meshSet = "A";
    double floorExtent = 0.7;
    std::string out;

    void run(const Global& g) const {
        if (count < 1) throw ConfigError("count must be >= 1");
        RunConfig cfg;
        cfg.objects = objects;
        cfg.resolution = resolution;
        cfg.meshSet = parse_mesh_set(meshSet);
        cfg.floorExtent = floorExtent;
        validate(cfg);
        const fs::path dir = g.prepare_out(out);
        for (int k = 0; k < count; ++k) {
            const std::int64_t id = firstId + k;
            const auto sceneSeed = hash_counter(seed, static_cast<std::uint64_t>(Stream::Placement), k);
            char name[32];
            std::snprintf(name, sizeof(name), "scene_%04lld.json", static_cast<long long>(id));
            save_scene(dir / name, generate_scene(cfg, sceneSeed, id));
        }
        log("wrote " + std::to_string(count) + " scenes to " + dir.string());
    }
};

// randomize --------------------------------------------------------------------

struct RandomizeCmd {
    std::string scenes;
    int perScene = 4;
    std::uint64_t seed = 0;
    int resolution = 64;
    std::string materialMode = "A+S+R";
    std::string lightMode = "dynamic";
    std::string out;

    void run(const Global& g) const {
        if (perScene < 1) throw ConfigError("per-scene must be >= 1");
        RunConfig cfg;
        cfg.resolution = resolution;
        cfg.materialMode = parse_material_mode(materialMode);
        cfg.lightMode = parse_light_mode(lightMode);
        validate(cfg);
        const auto files = scene_files(g.path(scenes));
        const fs::path dir = g.prepare_out(out);
        Manifest m;
        for (const auto& file : files) {
            const SceneGraph scene = load_scene(file);
            const SceneContext ctx = prepare_scene(scene, resolution);
            char gname[32];
            std::snprintf(gname, sizeof(gname), "gbuffer/s%04lld", static_cast<long long>(scene.sceneId));
            save_gbuffer(dir / gname, ctx.gbuffer);
            for (int k = 0; k < perScene; ++k) {
                const Randomization r = randomize(ctx, cfg, light_seed(seed, scene.sceneId, k),
                                                  material_seed(seed, scene.sceneId, k));
                ManifestSample s;
                s.sceneId = scene.sceneId;
                s.lightSeed = r.lightSeed;
                s.materialSeed = r.materialSeed;
                s.light = r.light;
                s.materials = r.materials;
                s.scene = rel(file, dir);
                s.gbuffer = gname;
                const std::string name = "samples/" + sample_name(s, k);
                save_material_maps(dir / name / "materials", compose_material_maps(ctx.gbuffer, r.materials));
                save_light_maps(dir / name / "lights", light_maps(ctx.gbuffer, r.light));
                s.materialMaps = name + "/materials";
                s.lightMaps = name + "/lights";
                m.samples.push_back(std::move(s));
            }
        }
        write_manifest(dir / "manifest.json", m);
        log("wrote " + std::to_string(m.samples.size()) + " randomizations to " + (dir / "manifest.json").string());
    }
};

// render-oracle ------------------------------------------------------------------

struct RenderOracle {
    std::string manifest;
    int indirectSamples = 16;
    int glossySamples = 8;
    std::string indirect = "on";
    std::string diffuseModel = "oren-nayar";
    std::uint64_t seed = 0;
    std::string out;

    void run(const Global& g) const {
        const ShadeConfig shade = shade_config(indirectSamples, glossySamples, indirect, diffuseModel, seed);
        const fs::path mpath = g.path(manifest);
        const Manifest in = read_manifest(mpath);
        const fs::path dir = g.prepare_out(out);
        Manifest m;
        std::map<std::string, SceneContext> contexts;
        for (std::size_t i = 0; i < in.samples.size(); ++i) {
            const ManifestSample& src = in.samples[i];
            if (src.scene.empty()) throw ConfigError("render-oracle: sample " + std::to_string(i) + " has no scene");
            auto it = contexts.find(src.scene);
            if (it == contexts.end()) {
                const LoadedSample ls = load_sample(mpath, src);
                SceneContext ctx = prepare_scene(ls.scene, ls.gbuffer.width);
                if (!(ctx.gbuffer == ls.gbuffer)) {
                    throw ConfigError("render-oracle: gbuffer of sample " + std::to_string(i) + " does not match its scene");
                }
                it = contexts.emplace(src.scene, std::move(ctx)).first;
            }
            const Randomization r{src.lightSeed, src.materialSeed, src.light, src.materials};
            const RenderedSample rs = render_sample(it->second, r, shade);
            ManifestSample s = rebase(src, mpath.parent_path(), dir);
            const std::string name = sample_name(src, static_cast<int>(i));
            save_light_buffers(dir / "buffers" / name, rs.buffers);
            save_png(ldr(rs), dir / "previews" / (name + ".png"));
            s.lightBuffers = "buffers/" + name;
            s.ldrPreview = "previews/" + name + ".png";
            m.samples.push_back(std::move(s));
        }
        write_manifest(dir / "manifest.json", m);
        log("rendered " + std::to_string(m.samples.size()) + " samples");
    }
};

// train-rendernet ------------------------------------------------------------------

std::vector<TrainSample> load_training_set(const fs::path& mpath, const Manifest& m) {
    std::vector<TrainSample> samples;
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
        LoadedSample ls = load_sample(mpath, m.samples[i]);
        if (ls.buffers.height() == 0) {
            throw ConfigError("sample " + std::to_string(i) + " has no lightBuffers; run render-oracle first");
        }
        samples.push_back({assemble_input(ls.gbuffer, ls.materials, ls.lights), pack_buffers(ls.buffers),
                           ls.gbuffer.valid});
    }
    if (samples.empty()) throw ConfigError("manifest has no samples");
    return samples;
}

struct TrainCmd {
    std::string manifest;
    int epochs = 50;
    double lr = 1e-4;
    int batchSize = 4;
    std::uint64_t seed = 0;
    int levels = 3;
    int baseChannels = 16;
    std::string init;
    std::string out;

    void run(const Global& g) const {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.learningRate = lr;
        tc.batchSize = batchSize;
        tc.seed = seed;
        validate(tc);
        Architecture arch;
        arch.levels = levels;
        arch.baseChannels = baseChannels;
        if (levels < 1 || levels > 6) throw ConfigError("levels must be in [1, 6]");
        if (baseChannels < 1) throw ConfigError("base-channels must be >= 1");
        const fs::path mpath = g.path(manifest);
        const auto samples = load_training_set(mpath, read_manifest(mpath));
        const fs::path dir = g.prepare_out(out);
        NetParams start = init.empty() ? init_params(arch, seed) : load_checkpoint(g.path(init));
        const auto t0 = Clock::now();
        TrainResult res = train(std::move(start), samples, tc, [&](int e, double loss, const NetParams&) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "epoch %d loss %.5f (%.1fs)", e, loss, seconds_since(t0));
            log(buf);
        });
        save_checkpoint(dir / "rendernet.ckpt", res.params);
        write_loss_csv(dir / "loss.csv", res.epochLoss);
    }
};

// render-net ---------------------------------------------------------------------

struct RenderNet {
    std::string checkpoint;
    std::string manifest;
    std::string out;

    void run(const Global& g) const {
        const NetParams net = load_checkpoint(g.path(checkpoint));
        const fs::path mpath = g.path(manifest);
        const Manifest in = read_manifest(mpath);
        const fs::path dir = g.prepare_out(out);
        Manifest m;
        for (std::size_t i = 0; i < in.samples.size(); ++i) {
            const LoadedSample ls = load_sample(mpath, in.samples[i]);
            const LightBuffers b = predict_buffers(net, ls.gbuffer, ls.materials, ls.lights);
            const std::string name = sample_name(in.samples[i], static_cast<int>(i));
            ManifestSample s = rebase(in.samples[i], mpath.parent_path(), dir);
            save_light_buffers(dir / "buffers" / name, b);
            save_png(render_ldr(b, ls.materials.A, ls.materials.S), dir / "previews" / (name + ".png"));
            s.lightBuffers = "buffers/" + name;
            s.ldrPreview = "previews/" + name + ".png";
            m.samples.push_back(std::move(s));
        }
        write_manifest(dir / "manifest.json", m);
        log("rendered " + std::to_string(m.samples.size()) + " samples with the network");
    }
};

// eval -----------------------------------------------------------------------------

LdrImage render_manifest_sample(const fs::path& mpath, const ManifestSample& s) {
    const LoadedSample ls = load_sample(mpath, s);
    if (ls.buffers.height() == 0) throw ConfigError(mpath.string() + ": sample has no lightBuffers");
    return render_ldr(ls.buffers, ls.materials.A, ls.materials.S);
}

struct Eval {
    std::string pred;
    std::string gt;
    std::vector<std::string> metrics = {"psnr", "ssim"};
    std::string out;

    void run(const Global& g) const {
        for (const auto& name : metrics) {
            if (name != "psnr" && name != "ssim" && name != "l1") {
                throw ConfigError("metrics: unknown metric '" + name + "' (expected psnr, ssim, l1)");
            }
        }
        const fs::path ppath = g.path(pred), gpath = g.path(gt);
        const Manifest pm = read_manifest(ppath), gm = read_manifest(gpath);
        if (pm.samples.size() != gm.samples.size() || pm.samples.empty()) {
            throw ConfigError("pred and gt manifests must list the same non-zero number of samples");
        }
        const fs::path dir = g.prepare_out(out);
        MetricReport report;
        report.sampleCount = pm.samples.size();
        std::map<std::string, double> sums;
        for (std::size_t i = 0; i < pm.samples.size(); ++i) {
            if (pm.samples[i].sceneId != gm.samples[i].sceneId) {
                throw ConfigError("sample " + std::to_string(i) + ": pred and gt scenes differ");
            }
            const LdrImage a = render_manifest_sample(ppath, pm.samples[i]);
            const LdrImage b = render_manifest_sample(gpath, gm.samples[i]);
            const GBuffer gb = load_gbuffer(gpath.parent_path() / gm.samples[i].gbuffer);
            for (const auto& name : metrics) {
                if (name == "psnr") sums[name] += psnr(a, b);
                if (name == "ssim") sums[name] += ssim(a, b);
                if (name == "l1") sums[name] += photometric_loss(a, b, gb.valid);
            }
        }
        for (const auto& [k, v] : sums) report.values[k] = v / static_cast<double>(report.sampleCount);
        const Json j = to_json(report);
        save_json(dir / "metrics.json", j);
        std::cout << j.dump(2) << "\n";
        for (const auto& [k, v] : report.values) {
            if (!std::isfinite(v)) throw NumericError("metric " + k + " is not finite");
        }
    }
};

// invert ---------------------------------------------------------------------------

Json recovered_json(const RecoverResult& r, const std::string& mode) {
    Json mats = Json::array();
    for (const auto& m : r.materials) mats.push_back(to_json(m));
    return Json{{"mode", mode},
                {"light", to_json(r.light)},
                {"materials", mats},
                {"loss", r.loss},
                {"initialLoss", r.initialLoss},
                {"bestInit", r.bestInit},
                {"steps", r.lossHistory.size()}};
}

struct Invert {
    std::string checkpoint;
    std::string target;
    std::string gbuffer;
    std::string scene;
    std::string known;
    std::string manifest;
    int sample = -1;
    std::string mode = "light";
    int steps = 500;
    double lr = 1e-2;
    int inits = 8;
    std::uint64_t seed = 0;
    std::string out;

    void run(const Global& g) const {
        RecoverMode rm;
        if (mode == "light") {
            rm = RecoverMode::Light;
        } else if (mode == "material") {
            rm = RecoverMode::Material;
        } else if (mode == "both") {
            rm = RecoverMode::Both;
        } else {
            throw ConfigError("mode must be light, material, or both");
        }
        RecoverConfig cfg;
        cfg.steps = steps;
        cfg.learningRate = lr;
        cfg.nInits = inits;
        cfg.seed = seed;
        validate(cfg);

        InverseScene is;
        if (!manifest.empty()) {
            const fs::path mpath = g.path(manifest);
            const Manifest m = read_manifest(mpath);
            if (sample < 0 || sample >= static_cast<int>(m.samples.size())) {
                throw ConfigError("sample must index the manifest (0.." + std::to_string(m.samples.size()) + ")");
            }
            const ManifestSample& s = m.samples[sample];
            const LoadedSample ls = load_sample(mpath, s);
            is = {ls.gbuffer, ls.scene.worldToCamera, s.sceneId};
            cfg.knownLight = s.light;
            cfg.knownMaterials = s.materials;
        } else {
            if (gbuffer.empty() || scene.empty()) throw ConfigError("invert needs --manifest or --gbuffer and --scene");
            const SceneGraph sg = load_scene(g.path(scene));
            is = {load_gbuffer(g.path(gbuffer)), sg.worldToCamera, sg.sceneId};
        }
        if (!known.empty()) {
            const Json j = load_json(g.path(known));
            if (j.contains("light")) cfg.knownLight = light_from_json(j.at("light"));
            if (j.contains("materials")) {
                cfg.knownMaterials.clear();
                for (const auto& mj : j.at("materials")) cfg.knownMaterials.push_back(material_from_json(mj));
            }
        }
        const NetParams net = load_checkpoint(g.path(checkpoint));
        const LdrImage tgt = load_image(g.path(target));
        const fs::path dir = g.prepare_out(out);
        const RecoverResult r = recover_scene(net, tgt, is, rm, cfg);
        save_json(dir / "recovered.json", recovered_json(r, mode));
        save_png(render_scene(net, is, r.light, r.materials), dir / "best_fit.png");
        write_loss_csv(dir / "loss.csv", r.lossHistory);
        std::cout << recovered_json(r, mode).dump(2) << "\n";
    }
};

// benchmark ------------------------------------------------------------------------

struct Benchmark {
    std::string checkpoint;
    std::string manifest;
    int indirectSamples = 64;
    int glossySamples = 32;
    int limit = 0;
    std::string out;

    void run(const Global& g) const {
        const ShadeConfig shade = shade_config(indirectSamples, glossySamples, "on", "oren-nayar", 0);
        const NetParams net = load_checkpoint(g.path(checkpoint));
        const fs::path mpath = g.path(manifest);
        const Manifest m = read_manifest(mpath);
        std::size_t n = m.samples.size();
        if (limit > 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(limit));
        if (n == 0) throw ConfigError("benchmark needs at least one sample");
        const fs::path dir = g.prepare_out(out);
        double oracleTime = 0, netTime = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const ManifestSample& s = m.samples[i];
            const LoadedSample ls = load_sample(mpath, s);
            const SceneContext ctx = prepare_scene(ls.scene, ls.gbuffer.width);
            const Randomization r{s.lightSeed, s.materialSeed, s.light, s.materials};
            auto t0 = Clock::now();
            const RenderedSample rs = render_sample(ctx, r, shade);
            const LdrImage a = ldr(rs);
            oracleTime += seconds_since(t0);
            t0 = Clock::now();
            const LdrImage b = infer_render(net, ls.gbuffer, ls.materials, ls.lights);
            netTime += seconds_since(t0);
            if (a.size() != b.size()) throw NumericError("benchmark: image size mismatch");
        }
        const double oracleMs = 1e3 * oracleTime / n, netMs = 1e3 * netTime / n;
        const Json j{{"samples", n},
                     {"indirectSamples", indirectSamples},
                     {"threads", thread_count()},
                     {"oracleMsPerImage", oracleMs},
                     {"netMsPerImage", netMs},
                     {"speedup", oracleMs / netMs}};
        save_json(dir / "benchmark.json", j);
        std::cout << j.dump(2) << "\n";
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural domain randomization pipeline"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "Rerun from a config.json echo");
    app.require_subcommand(0, 1);
    Global g;
    g.app = &app;
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--run-dir", g.runDir, "Base directory for relative paths (default $PNDR_RUN_DIR or cwd)");

    GenScenes gen;
    auto* c = app.add_subcommand("gen-scenes", "Sample scene layouts");
    c->add_option("--count", gen.count, "Number of scenes")->capture_default_str();
    c->add_option("--objects", gen.objects, "Objects per scene")->capture_default_str();
    c->add_option("--seed", gen.seed, "Layout seed")->capture_default_str();
    c->add_option("--first-id", gen.firstId, "Scene id of the first scene")->capture_default_str();
    c->add_option("--resolution", gen.resolution, "Image size in pixels")->capture_default_str();
    c->add_option("--mesh-set", gen.meshSet, "Object shapes: A or B")->capture_default_str();
    c->add_option("--floor-extent", gen.floorExtent, "Half-size of the placement area, meters")->capture_default_str();
    c->add_option("--out", gen.out, "Output directory")->required();

    RandomizeCmd rnd;
    c = app.add_subcommand("randomize", "Draw lights and materials and write a manifest");
    c->add_option("--scenes", rnd.scenes, "Directory of scene_*.json files")->required();
    c->add_option("--per-scene", rnd.perScene, "Randomizations per scene")->capture_default_str();
    c->add_option("--seed", rnd.seed, "Dataset seed")->capture_default_str();
    c->add_option("--resolution", rnd.resolution, "Image size in pixels")->capture_default_str();
    c->add_option("--material-mode", rnd.materialMode, "A or A+S+R")->capture_default_str();
    c->add_option("--light-mode", rnd.lightMode, "fixed or dynamic")->capture_default_str();
    c->add_option("--out", rnd.out, "Output directory")->required();

    RenderOracle ro;
    c = app.add_subcommand("render-oracle", "Render light buffers with the ray tracer");
    c->add_option("--manifest", ro.manifest, "Input manifest")->required();
    c->add_option("--indirect-samples", ro.indirectSamples, "Diffuse gather rays per pixel")->capture_default_str();
    c->add_option("--glossy-samples", ro.glossySamples, "Glossy gather rays per pixel")->capture_default_str();
    c->add_option("--indirect", ro.indirect, "on or off")->capture_default_str();
    c->add_option("--diffuse-model", ro.diffuseModel, "oren-nayar or lambertian")->capture_default_str();
    c->add_option("--seed", ro.seed, "Sampling seed")->capture_default_str();
    c->add_option("--out", ro.out, "Output directory")->required();

    TrainCmd tr;
    c = app.add_subcommand("train-rendernet", "Fit the neural renderer to oracle buffers");
    c->add_option("--manifest", tr.manifest, "Manifest with light buffers")->required();
    c->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
    c->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
    c->add_option("--batch-size", tr.batchSize, "Samples per step")->capture_default_str();
    c->add_option("--seed", tr.seed, "Initialization and shuffling seed")->capture_default_str();
    c->add_option("--levels", tr.levels, "U-Net levels")->capture_default_str();
    c->add_option("--base-channels", tr.baseChannels, "Channels at full resolution")->capture_default_str();
    c->add_option("--init", tr.init, "Checkpoint to continue from");
    c->add_option("--out", tr.out, "Output directory")->required();

    RenderNet rn;
    c = app.add_subcommand("render-net", "Predict light buffers with a trained network");
    c->add_option("--checkpoint", rn.checkpoint, "Network checkpoint")->required();
    c->add_option("--manifest", rn.manifest, "Input manifest")->required();
    c->add_option("--out", rn.out, "Output directory")->required();

    Eval ev;
    c = app.add_subcommand("eval", "Compare two rendered manifests");
    c->add_option("--pred", ev.pred, "Predicted manifest")->required();
    c->add_option("--gt", ev.gt, "Reference manifest")->required();
    c->add_option("--metrics", ev.metrics, "Comma-separated: psnr, ssim, l1")->delimiter(',')->capture_default_str();
    c->add_option("--out", ev.out, "Output directory")->required();

    Invert inv;
    c = app.add_subcommand("invert", "Recover light and/or materials from an image");
    c->add_option("--checkpoint", inv.checkpoint, "Network checkpoint")->required();
    c->add_option("--target", inv.target, "Target image (.png or tensor)")->required();
    c->add_option("--gbuffer", inv.gbuffer, "G-buffer directory");
    c->add_option("--scene", inv.scene, "Scene JSON (camera pose and scene id)");
    c->add_option("--manifest", inv.manifest, "Take G-buffer, scene, and known values from a manifest");
    c->add_option("--sample", inv.sample, "Manifest sample index");
    c->add_option("--known", inv.known, "JSON with the light and/or materials held fixed");
    c->add_option("--mode", inv.mode, "light, material, or both")->capture_default_str();
    c->add_option("--steps", inv.steps, "Optimization steps")->capture_default_str();
    c->add_option("--lr", inv.lr, "Adam learning rate")->capture_default_str();
    c->add_option("--inits", inv.inits, "Light initializations")->capture_default_str();
    c->add_option("--seed", inv.seed, "Initialization seed")->capture_default_str();
    c->add_option("--out", inv.out, "Output directory")->required();

    Benchmark bm;
    c = app.add_subcommand("benchmark", "Time the oracle against the network");
    c->add_option("--checkpoint", bm.checkpoint, "Network checkpoint")->required();
    c->add_option("--manifest", bm.manifest, "Samples to render")->required();
    c->add_option("--indirect-samples", bm.indirectSamples, "Diffuse gather rays per pixel")->capture_default_str();
    c->add_option("--glossy-samples", bm.glossySamples, "Glossy gather rays per pixel")->capture_default_str();
    c->add_option("--limit", bm.limit, "Use at most this many samples (0 = all)")->capture_default_str();
    c->add_option("--out", bm.out, "Output directory")->required();

    for (auto* sub : app.get_subcommands({})) sub->configurable();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code(ErrorKind::Config);
    }

    if (app.get_subcommands().empty()) {
        std::cerr << "a command is required\n" << app.help();
        return exit_code(ErrorKind::Config);
    }

    try {
        set_thread_count(g.threads);
        g.root = resolve_run_dir(g.runDir);
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "gen-scenes") gen.run(g);
        if (cmd == "randomize") rnd.run(g);
        if (cmd == "render-oracle") ro.run(g);
        if (cmd == "train-rendernet") tr.run(g);
        if (cmd == "render-net") rn.run(g);
        if (cmd == "eval") ev.run(g);
        if (cmd == "invert") inv.run(g);
        if (cmd == "benchmark") bm.run(g);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const Json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(ErrorKind::Parse);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(ErrorKind::Io);
    }
    return 0;
}
