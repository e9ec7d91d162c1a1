// switchlab command-line driver.
//
//   switchlab gen-data --config c.json [--out data/] [--fds-demo]
//   switchlab pretrain --config c.json --out ckpt/
//   switchlab train --config c.json --init ckpt/pre.bin --out ckpt/
//   switchlab eval --config c.json --ckpt ckpt/teacher.bin --split test --out report/
//   switchlab analyze-strategy --iters 10000 --out report/
//
// Exit codes: 0 success, 2 config error, 3 data error, 1 anything else.

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "switchlab/alloc.hpp"
#include "switchlab/error.hpp"
#include "switchlab/pgm.hpp"
#include "switchlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace switchlab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

TrainConfig config_or_default(const std::string& path) {
    return path.empty() ? default_train_config() : load_train_config(path);
}

void print_report(const char* label, const MetricReport& r) {
    std::printf("%s: dice %.2f  iou %.2f  hd95 %.2f  asd %.2f  (n=%zu, undefined distances %zu)\n", label, r.mean_dice,
                r.mean_iou, r.mean_hd95, r.mean_asd, r.per_image.size(), r.undefined_distance_count);
}

// Before/after pairs of the frequency-domain switch on the first few
// labeled/unlabeled images.
void write_fds_demo(const DatasetSplit& split, const FdsConfig& fds, const fs::path& dir) {
    fs::create_directories(dir);
    const std::size_t n = std::min<std::size_t>({4, split.labeled.size(), split.unlabeled.size()});
    for (std::size_t i = 0; i < n; ++i) {
        const Image& x = split.labeled[i].image;
        const Image& u = split.unlabeled[i].image;
        const auto [xr, ur] = fds_pair(x, u, fds);
        const std::string k = std::to_string(i);
        write_pgm(dir / ("x_" + k + ".pgm"), x);
        write_pgm(dir / ("u_" + k + ".pgm"), u);
        write_pgm(dir / ("x_r_" + k + ".pgm"), xr);
        write_pgm(dir / ("u_r_" + k + ".pgm"), ur);
    }
    std::printf("wrote %zu FDS demo pairs to %s\n", n, dir.c_str());
}

int gen_data(const std::string& config, std::string out, bool fds_demo) {
    const TrainConfig cfg = config_or_default(config);
    if (out.empty()) out = cfg.data_dir.empty() ? "data" : cfg.data_dir;
    const DatasetSplit split = make_dataset(cfg.synth, cfg.labeled_ratio, cfg.split, cfg.synth.seed);
    write_dataset(split, out);
    std::printf("wrote %zu labeled, %zu unlabeled, %zu val, %zu test items to %s\n", split.labeled.size(),
                split.unlabeled.size(), split.val.size(), split.test.size(), out.c_str());
    if (fds_demo) write_fds_demo(split, cfg.fds, fs::path(out) / "fds_demo");
    return 0;
}

int run_pretrain(const std::string& config, const fs::path& out) {
    const TrainConfig cfg = config_or_default(config);
    const DatasetSplit data = load_or_generate_data(cfg);
    const PretrainResult res = pretrain(cfg, data);
    save_checkpoint(out / "pre.bin", res.student, res.velocity);
    res.log.write(out / "pretrain_log.jsonl");
    std::printf("pretrain: %ld iterations, final loss %.6f -> %s\n", cfg.pretrain_iters,
                res.log.steps.back().loss.total, (out / "pre.bin").c_str());
    return 0;
}

int run_train(const std::string& config, const fs::path& init, const fs::path& out) {
    const TrainConfig cfg = config_or_default(config);
    const DatasetSplit data = load_or_generate_data(cfg);
    const Checkpoint ck = load_checkpoint(init);
    const SegNet net(cfg.net);
    if (ck.params.layout_hash != net.layout_hash() || ck.params.size() != net.param_count())
        throw DataError("checkpoint " + init.string() + " does not match the configured network");
    const SelfTrainResult res = self_train(cfg, data, ck.params);
    save_checkpoint(out / "student.bin", res.student, res.velocity);
    save_checkpoint(out / "teacher.bin", res.teacher);
    save_checkpoint(out / "best.bin", res.best);
    res.log.write(out / "train_log.jsonl");
    std::printf("train: %ld iterations, best val dice %.2f at step %ld\n", cfg.selftrain_iters, res.best_val_dice,
                res.best_step);
    return 0;
}

int run_eval(const std::string& config, const fs::path& ckpt, const std::string& split, const fs::path& out) {
    const TrainConfig cfg = config_or_default(config);
    const DatasetSplit data = load_or_generate_data(cfg);
    const SegNet net(cfg.net);
    const Checkpoint ck = load_checkpoint(ckpt);
    if (ck.params.layout_hash != net.layout_hash() || ck.params.size() != net.param_count())
        throw DataError("checkpoint " + ckpt.string() + " does not match the configured network");
    const auto& part = split == "val" ? data.val : data.test;
    const MetricReport r = evaluate(net, ck.params, part, cfg.hd95_mode);
    write_metrics_csv(r, out / "per_image.csv");
    write_metrics_json(r, out / "metrics.json");
    print_report(split.c_str(), r);
    return 0;
}

int run_strategy(int iters, int size, std::uint64_t seed, const fs::path& out) {
    const StrategyReport rep = strategy_analysis(size, size, iters, seed);
    fs::create_directories(out);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        std::string name = rep.rows[i].name;
        for (char& c : name)
            if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
        write_pgm(out / ("map_" + name + ".pgm"), rep.maps[i], 0.0, 1.0);
        std::printf("%-10s std %.4f  grad-var %.3e  std reduction %6.2f%%  grad-var reduction %6.2f%%\n",
                    rep.rows[i].name.c_str(), rep.rows[i].stddev, rep.rows[i].gradient_variance,
                    rep.rows[i].std_reduction_pct, rep.rows[i].gradvar_reduction_pct);
    }
    std::ofstream(out / "strategy.json") << rep.to_json() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    switchlab::retain_freed_memory();
    CLI::App app{"Switch semi-supervised segmentation toolkit"};
    app.require_subcommand(1);

    std::string config, out, init, ckpt, split = "test";
    int iters = 10000, size = 256;
    std::uint64_t seed = 0;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    gen->add_option("--config", config, "JSON config");
    gen->add_option("--out", out, "output directory (default: config data.dir or ./data)");
    bool fds_demo = false;
    gen->add_flag("--fds-demo", fds_demo, "also write before/after FDS image pairs");

    auto* pre = app.add_subcommand("pretrain", "labeled-only pre-training");
    pre->add_option("--config", config, "JSON config");
    pre->add_option("--out", out, "checkpoint directory")->required();

    auto* train = app.add_subcommand("train", "teacher-student self-training");
    train->add_option("--config", config, "JSON config");
    train->add_option("--init", init, "pre-trained checkpoint")->required();
    train->add_option("--out", out, "checkpoint directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--config", config, "JSON config");
    eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
    eval->add_option("--split", split, "val or test")->check(CLI::IsMember({"val", "test"}));
    eval->add_option("--out", out, "report directory")->required();

    auto* strat = app.add_subcommand("analyze-strategy", "switch-probability study of BCP and MSS masks");
    strat->add_option("--iters", iters, "mask draws per strategy");
    strat->add_option("--size", size, "image side length");
    strat->add_option("--seed", seed, "random seed");
    strat->add_option("--out", out, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*gen) return gen_data(config, out, fds_demo);
        if (*pre) return run_pretrain(config, out);
        if (*train) return run_train(config, init, out);
        if (*eval) return run_eval(config, ckpt, split, out);
        if (*strat) return run_strategy(iters, size, seed, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
