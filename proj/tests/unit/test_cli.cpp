#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "switchlab_test_cli";

int run(const std::string& args) {
    const std::string cmd = std::string(SWITCHLAB_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(kWork);
    const fs::path p = kWork / name;
    std::ofstream(p) << text;
    return p;
}

constexpr const char* kTiny = R"({
  "seed": 3,
  "data": {"height": 32, "width": 32, "count": 40, "labeled_ratio": 0.25},
  "net": {"widths": [4, 8], "embed_dim": 4, "projector_channels": 4},
  "optim": {"pretrain_iters": 3, "selftrain_iters": 2, "labeled_batch": 4, "unlabeled_batch": 4},
  "mss": {"coarse_size": 16, "fine_size": 4},
  "fds": {"rho": 0.1}
})";

}  // namespace

TEST(Cli, UsageErrorsAreConfigErrors) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("pretrain"), 2);  // --out missing
    EXPECT_EQ(run("eval --ckpt x --split train --out y"), 2);
}

TEST(Cli, BadConfigExitsTwo) {
    const fs::path bad = write_config("bad.json", R"({"optim": {"lr": 1}})");
    EXPECT_EQ(run("pretrain --config " + bad.string() + " --out " + (kWork / "o").string()), 2);
    const fs::path odd = write_config("odd.json", R"({"optim": {"labeled_batch": 3, "unlabeled_batch": 3}})");
    EXPECT_EQ(run("pretrain --config " + odd.string() + " --out " + (kWork / "o").string()), 2);
    EXPECT_EQ(run("pretrain --config " + (kWork / "missing.json").string() + " --out x"), 2);
}

TEST(Cli, MissingCheckpointExitsThree) {
    const fs::path cfg = write_config("tiny.json", kTiny);
    EXPECT_EQ(run("eval --config " + cfg.string() + " --ckpt " + (kWork / "none.bin").string() + " --out " +
                  (kWork / "r").string()),
              3);
}

TEST(Cli, EndToEndTinyRun) {
    const fs::path cfg = write_config("tiny.json", kTiny);
    const fs::path ck = kWork / "ck", rep = kWork / "rep", data = kWork / "data";
    fs::remove_all(ck);
    ASSERT_EQ(run("gen-data --config " + cfg.string() + " --out " + data.string() + " --fds-demo"), 0);
    EXPECT_TRUE(fs::exists(data / "manifest.json"));
    EXPECT_TRUE(fs::exists(data / "fds_demo" / "x_r_0.pgm"));
    ASSERT_EQ(run("pretrain --config " + cfg.string() + " --out " + ck.string()), 0);
    ASSERT_EQ(run("train --config " + cfg.string() + " --init " + (ck / "pre.bin").string() + " --out " + ck.string()), 0);
    for (const char* f : {"pre.bin", "student.bin", "teacher.bin", "best.bin", "train_log.jsonl", "pretrain_log.jsonl"})
        EXPECT_TRUE(fs::exists(ck / f)) << f;
    ASSERT_EQ(run("eval --config " + cfg.string() + " --ckpt " + (ck / "teacher.bin").string() + " --split test --out " +
                  rep.string()),
              0);
    EXPECT_TRUE(fs::exists(rep / "per_image.csv"));
    EXPECT_TRUE(fs::exists(rep / "metrics.json"));
    // A checkpoint from a different network is a data error.
    const fs::path other = write_config("other.json", R"({"data": {"height": 32, "width": 32, "count": 40,
        "labeled_ratio": 0.25}, "net": {"widths": [4, 6]}})");
    EXPECT_EQ(run("eval --config " + other.string() + " --ckpt " + (ck / "teacher.bin").string() + " --out " +
                  rep.string()),
              3);
}

TEST(Cli, StrategyStudy) {
    const fs::path out = kWork / "strategy";
    ASSERT_EQ(run("analyze-strategy --iters 50 --size 32 --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "strategy.json"));
}
