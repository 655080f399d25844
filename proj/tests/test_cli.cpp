#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "pndr/dataio.hpp"
#include "test_util.hpp"

using namespace pndr;

namespace {

int run(const fs::path& runDir, const std::string& args) {
    const std::string cmd = std::string("\"") + PNDR_CLI_PATH + "\" --threads 2 --run-dir \"" + runDir.string() +
                            "\" " + args + " > \"" + (runDir / "last.log").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Two scenes, four randomizations each, rendered, trained briefly, and evaluated.
void pipeline(const fs::path& dir) {
    ASSERT_EQ(run(dir, "gen-scenes --count 2 --seed 5 --resolution 32 --out scenes"), 0);
    ASSERT_EQ(run(dir, "randomize --scenes scenes --per-scene 4 --seed 1 --resolution 32 --out rand"), 0);
    ASSERT_EQ(run(dir, "render-oracle --manifest rand/manifest.json --indirect-samples 4 --glossy-samples 2 --out gt"), 0);
    ASSERT_EQ(run(dir, "train-rendernet --manifest gt/manifest.json --epochs 2 --levels 2 --base-channels 4 --out net"),
              0);
    ASSERT_EQ(run(dir, "render-net --checkpoint net/rendernet.ckpt --manifest gt/manifest.json --out pred"), 0);
    ASSERT_EQ(run(dir, "eval --pred pred/manifest.json --gt gt/manifest.json --metrics psnr,ssim --out eval"), 0);
}

}  // namespace

TEST(Cli, SmokePipelineReportsFinitePsnr) {
    auto dir = test::temp_dir("cli_smoke");
    pipeline(dir);
    const Json report = load_json(dir / "eval/metrics.json");
    EXPECT_EQ(report.at("sampleCount").get<int>(), 8);
    const double p = report.at("metrics").at("psnr").get<double>();
    EXPECT_TRUE(std::isfinite(p));
    EXPECT_GT(p, 0.0);
    const double s = report.at("metrics").at("ssim").get<double>();
    EXPECT_GT(s, -1.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(read_manifest(dir / "gt/manifest.json").samples.size(), 8u);
    EXPECT_EQ(read_loss_csv(dir / "net/loss.csv").size(), 2u);
    for (const char* sub : {"scenes", "rand", "gt", "net", "pred", "eval"}) {
        EXPECT_TRUE(fs::exists(dir / sub / "config.json")) << sub;
    }
}

TEST(Cli, RerunIsByteIdentical) {
    auto a = test::temp_dir("cli_det_a");
    auto b = test::temp_dir("cli_det_b");
    pipeline(a);
    pipeline(b);
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const auto relPath = fs::relative(e.path(), a);
        if (relPath.filename() == "last.log" || relPath.filename() == "config.json") continue;
        ASSERT_TRUE(fs::exists(b / relPath)) << relPath;
        EXPECT_EQ(bytes(e.path()), bytes(b / relPath)) << relPath;
        ++compared;
    }
    EXPECT_GT(compared, 50u);
}

TEST(Cli, ConfigEchoReproducesOutputs) {
    auto dir = test::temp_dir("cli_echo");
    ASSERT_EQ(run(dir, "gen-scenes --count 1 --seed 2 --resolution 16 --out scenes"), 0);
    ASSERT_EQ(run(dir, "randomize --scenes scenes --per-scene 2 --resolution 16 --out rand"), 0);
    ASSERT_EQ(run(dir, "render-oracle --manifest rand/manifest.json --indirect-samples 2 --out gt"), 0);
    const std::string before = bytes(dir / "gt/buffers/s0000_0001/Gind.tensor");
    fs::copy(dir / "gt/config.json", dir / "echo.json");
    fs::remove_all(dir / "gt");
    ASSERT_EQ(run(dir, "--config \"" + (dir / "echo.json").string() + "\""), 0);
    EXPECT_EQ(bytes(dir / "gt/buffers/s0000_0001/Gind.tensor"), before);
}

TEST(Cli, ExitCodesFollowErrorClass) {
    auto dir = test::temp_dir("cli_codes");
    EXPECT_EQ(run(dir, ""), 2);
    EXPECT_EQ(run(dir, "gen-scenes"), 2);
    EXPECT_EQ(run(dir, "gen-scenes --objects 0 --out s"), 2);
    EXPECT_EQ(run(dir, "randomize --scenes missing --out r"), 3);
    EXPECT_EQ(run(dir, "render-oracle --manifest missing.json --out o"), 3);
    ASSERT_EQ(run(dir, "gen-scenes --count 1 --resolution 16 --out scenes"), 0);
    EXPECT_EQ(run(dir, "randomize --scenes scenes --light-mode sometimes --out r"), 2);
    EXPECT_NE(bytes(dir / "last.log").find("lightMode"), std::string::npos);
    EXPECT_EQ(run(dir, "train-rendernet --manifest x.json --epochs -1 --out n"), 2);
    write_text(dir / "bad.json", "{\"samples\": [");
    EXPECT_EQ(run(dir, "render-oracle --manifest bad.json --out o"), 2);
}

TEST(Cli, AblationFlagsChangeTheDraws) {
    auto dir = test::temp_dir("cli_ablation");
    ASSERT_EQ(run(dir, "gen-scenes --count 1 --resolution 16 --out scenes"), 0);
    ASSERT_EQ(run(dir, "randomize --scenes scenes --per-scene 3 --resolution 16 --light-mode fixed "
                       "--material-mode A --out fixed"),
              0);
    const Manifest m = read_manifest(dir / "fixed/manifest.json");
    ASSERT_EQ(m.samples.size(), 3u);
    for (const auto& s : m.samples) {
        EXPECT_EQ(s.light, m.samples[0].light);
        for (const auto& mat : s.materials) {
            EXPECT_EQ(mat.roughness, 0.5);
            EXPECT_EQ(mat.specularity, 0.5);
        }
    }
    EXPECT_NE(m.samples[0].materials, m.samples[1].materials);
}
