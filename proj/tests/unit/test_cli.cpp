#include "dcign/checkpoint.hpp"
#include "dcign/dataset.hpp"
#include "dcign/image_io.hpp"
#include "dcign/service.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

using namespace dcign;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("dcign_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs the CLI with stderr captured next to stdout; returns the exit code.
    int run(const std::string& args, std::string* output = nullptr) const {
        const auto log = dir_ / "cli.log";
        const std::string cmd = std::string(DCIGN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
        const int raw = std::system(cmd.c_str());
        if (output) *output = slurp(log);
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, UsageErrorsExitTwo) {
    std::string out;
    EXPECT_EQ(run("train --out " + path("x.ckpt") + " --no-such-flag", &out), 2);
    EXPECT_NE(out.find("usage error"), std::string::npos) << out;
    EXPECT_EQ(run("gen-data", &out), 2);
    EXPECT_EQ(run("train --out " + path("x.ckpt") + " --ratio 1:1", &out), 2);
    EXPECT_EQ(run("", &out), 2);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
    std::string out;
    EXPECT_EQ(run("eval --checkpoint " + path("missing.ckpt") + " --data " + path("missing.bin") + " --out " +
                      path("rep"),
                  &out),
              1);
    EXPECT_NE(out.find("missing.ckpt"), std::string::npos) << out;
}

TEST_F(CliTest, ZeroStepTrainingWritesTheInitialNetwork) {
    ASSERT_EQ(run("train --out " + path("init.ckpt") + " --steps 0 --seed 21 --resolution 16"), 0);
    const auto ckpt = load_checkpoint(path("init.ckpt"));
    const Network expected = build_network(NetworkConfig::desk_scale(16, LatentLayout::standard(16), 21));
    ASSERT_EQ(ckpt.parameters.size(), expected.parameters().size());
    for (std::size_t t = 0; t < ckpt.parameters.size(); ++t)
        EXPECT_TRUE(ckpt.parameters[t].identical(expected.parameters()[t])) << t;
    EXPECT_EQ(ckpt.step, 0u);
}

TEST_F(CliTest, GenDataHonoursRatioAndShape) {
    ASSERT_EQ(run("gen-data --out " + path("d.bin") + " --batches 6 --ratio 0:1:0:0 --resolution 8 --batch-size 3 --seed 4"), 0);
    const auto batches = read_dataset(path("d.bin"));
    ASSERT_EQ(batches.size(), 6u);
    for (const auto& b : batches) {
        EXPECT_EQ(b.active, Factor::elevation);
        EXPECT_EQ(b.size(), 3u);
        EXPECT_EQ(b.images[0].shape(), (Shape{1, 8, 8}));
    }
}

TEST_F(CliTest, ShortTrainingWritesMetricsAndIntermediateCheckpoints) {
    ASSERT_EQ(run("train --out " + path("m.ckpt") + " --steps 4 --checkpoint-every 2 --resolution 16 --batch-size 3 "
                  "--metrics " + path("m.csv")),
              0);
    EXPECT_TRUE(fs::exists(path("m.ckpt.step2")));
    EXPECT_FALSE(fs::exists(path("m.ckpt.step4")));
    EXPECT_EQ(load_checkpoint(path("m.ckpt")).step, 4u);
    const auto csv = slurp(path("m.csv"));
    EXPECT_EQ(csv.rfind("step,factor,reconstruction,kl,total\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST_F(CliTest, SingleStepSweepMatchesServiceDecode) {
    ASSERT_EQ(run("train --out " + path("s.ckpt") + " --steps 0 --seed 3 --resolution 16"), 0);
    ASSERT_EQ(run("render --out " + path("in.png") + " --azimuth 25 --elevation -10 --resolution 16"), 0);
    ASSERT_EQ(run("sweep --checkpoint " + path("s.ckpt") + " --image " + path("in.png") + " --out " + path("out.png") +
                  " --index 0 --steps 1"),
              0);

    const InferenceService service(restore_network(load_checkpoint(path("s.ckpt"))));
    const std::string png = slurp(path("in.png"));
    const auto enc = service.handle("POST", "/encode", nlohmann::json{{"image", base64_encode(png)}}.dump());
    ASSERT_EQ(enc.status, 200);
    const auto mu = nlohmann::json::parse(enc.body)["mu"];
    const auto dec = service.handle("POST", "/decode", nlohmann::json{{"latents", mu}}.dump());
    ASSERT_EQ(dec.status, 200);
    const auto service_png = base64_decode(nlohmann::json::parse(dec.body)["image"].get<std::string>());
    EXPECT_EQ(slurp(path("out.png")), service_png);
}
