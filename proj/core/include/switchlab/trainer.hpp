#pragma once

// Two-phase training (labeled-only pre-training, then teacher-student
// self-training), evaluation and the mask-strategy study.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "switchlab/augment.hpp"
#include "switchlab/fds.hpp"
#include "switchlab/losses.hpp"
#include "switchlab/metrics.hpp"
#include "switchlab/mss.hpp"
#include "switchlab/network.hpp"
#include "switchlab/objective.hpp"
#include "switchlab/synthdata.hpp"

namespace switchlab {

struct TrainConfig {
    // data
    SynthConfig synth;
    double labeled_ratio = 0.05;
    SplitRatios split;
    std::string data_dir;  // read from disk when set, otherwise generated in memory

    NetConfig net;
    double lr0 = 0.05;
    double momentum = 0.9;
    long pretrain_iters = 10000;
    long selftrain_iters = 30000;
    int labeled_batch = 8;
    int unlabeled_batch = 8;
    double ema_alpha = 0.99;
    MssConfig mss;
    FdsConfig fds;
    LossWeights loss;
    AugmentPolicy augment;

    // module switches
    bool use_mss = true;          // off: supervised-only on the labeled batch
    bool use_fds = true;
    bool use_augment = true;
    bool use_contrastive = true;  // requires use_fds
    bool use_consistency = true;  // requires use_fds
    bool teacher_lcc = true;      // largest-component filter on pseudo-labels

    // evaluation
    long eval_every = 0;          // validation interval during self-training; 0 = end only
    bool eval_teacher = true;     // false: report the student
    Hd95Mode hd95_mode = Hd95Mode::pooled;

    std::uint64_t seed = 0;

    void validate() const;
};

/// Paper defaults at 256x256 with the default network.
TrainConfig default_train_config();

/// Unknown keys are rejected; missing keys keep their defaults.
TrainConfig parse_train_config(std::string_view json_text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string to_json(const TrainConfig& cfg);

struct StepRecord {
    std::string phase;
    long step = 0;
    double lr = 0.0;
    LossBreakdown loss;
};

struct EvalRecord {
    std::string phase;
    long step = 0;
    double dice = 0.0;
    double iou = 0.0;
    double hd95 = 0.0;
    double asd = 0.0;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EvalRecord> evals;

    /// Line-delimited JSON, steps and evals interleaved in step order.
    std::string to_jsonl() const;
    void write(const std::filesystem::path& path) const;
};

/// In-memory split for the configured synthetic family, or the on-disk
/// dataset when cfg.data_dir is set.
DatasetSplit load_or_generate_data(const TrainConfig& cfg);

struct PretrainResult {
    SegNetParams student;
    std::vector<double> velocity;
    TrainLog log;
};

/// Labeled-only training with MSS-mixed labeled pairs and (Dice + CE) / 2.
/// `iters` < 0 uses cfg.pretrain_iters.
PretrainResult pretrain(const TrainConfig& cfg, const DatasetSplit& data, long iters = -1);

struct SelfTrainResult {
    SegNetParams student;
    SegNetParams teacher;
    SegNetParams best;          // evaluated model at its best validation Dice
    double best_val_dice = -1.0;
    long best_step = -1;
    std::vector<double> velocity;
    TrainLog log;
};

/// Teacher and student both start from `init`. Never reads data.sealed.
SelfTrainResult self_train(const TrainConfig& cfg, const DatasetSplit& data, const SegNetParams& init);

/// Argmax predictions without component filtering.
MetricReport evaluate(const SegNet& net, const SegNetParams& params, std::span<const Sample> samples,
                      Hd95Mode mode = Hd95Mode::pooled);

std::vector<LabelMask> predict(const SegNet& net, const SegNetParams& params, std::span<const Image> images);

void write_metrics_csv(const MetricReport& report, const std::filesystem::path& path);
void write_metrics_json(const MetricReport& report, const std::filesystem::path& path);

struct StrategyRow {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;
    double gradient_variance = 0.0;
    double std_reduction_pct = 0.0;       // relative to the BCP row
    double gradvar_reduction_pct = 0.0;
};

struct StrategyReport {
    int height = 0, width = 0, iterations = 0;
    std::vector<StrategyRow> rows;  // BCP(2/3), MSS(2,2), MSS(2,10)
    std::vector<Field> maps;

    std::string to_json() const;
};

/// Switch-probability maps of BCP(2/3) and MSS(p=2,q=2), MSS(p=2,q=10) with
/// 128/32 patches scaled to the image size.
StrategyReport strategy_analysis(int height, int width, int n_iter, std::uint64_t seed);

}  // namespace switchlab
