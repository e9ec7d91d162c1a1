#pragma once

// Synthetic ultrasound-like images: speckled background with one hypoechoic,
// slightly deformed elliptical region of interest. Includes the
// labeled/unlabeled split and its on-disk layout.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "switchlab/grid.hpp"
#include "switchlab/random.hpp"

namespace switchlab {

struct SynthConfig {
    int height = 256;
    int width = 256;
    int count = 500;
    double roi_min = 0.04;        // ROI area as a fraction of the image
    double roi_max = 0.20;
    double speckle = 0.40;        // std of the multiplicative noise field
    double shadow_prob = 0.4;
    double contrast = 0.11;       // minimum background-minus-ROI mean intensity
    double gain_spread = 0.35;    // per-image gain drawn from [1 - s, 1 + s]
    double boundary_blur = 1.2;   // edge softness in pixels
    std::uint64_t seed = 2024;

    void validate() const;
};

struct Sample {
    int id = 0;
    Image image;
    LabelMask mask;
};

/// One image and its exact ROI support.
std::pair<Image, LabelMask> generate_sample(const SynthConfig& cfg, Rng& rng);

/// Sample `id` of the dataset defined by cfg.seed.
Sample generate_item(const SynthConfig& cfg, int id);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct UnlabeledItem {
    int id = 0;
    Image image;
};

/// Ground truth of the unlabeled training items. Every read is counted so
/// tests can prove the training path never touches it.
class SealedLabels {
public:
    SealedLabels() = default;
    SealedLabels(const SealedLabels& o) : masks_(o.masks_), reads_(o.reads_.load()) {}
    SealedLabels& operator=(const SealedLabels& o) {
        masks_ = o.masks_;
        reads_ = o.reads_.load();
        return *this;
    }

    void seal(int id, LabelMask m) { masks_.insert_or_assign(id, std::move(m)); }
    const LabelMask& reveal(int id) const;
    std::size_t size() const noexcept { return masks_.size(); }
    std::size_t access_count() const noexcept { return reads_.load(); }
    std::vector<int> ids() const;

private:
    std::map<int, LabelMask> masks_;
    mutable std::atomic<std::size_t> reads_{0};
};

struct DatasetSplit {
    std::vector<Sample> labeled;
    std::vector<UnlabeledItem> unlabeled;
    SealedLabels sealed;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

struct SplitCounts {
    int train = 0, val = 0, test = 0, labeled = 0;
};

/// train = floor(n * r_train), val = floor(n * r_val), test = remainder,
/// labeled = floor(train * labeled_ratio). Throws ConfigError when the
/// labeled count would be below one.
SplitCounts split_counts(int n, double labeled_ratio, const SplitRatios& ratios);

DatasetSplit make_dataset(const SynthConfig& cfg, double labeled_ratio, const SplitRatios& ratios,
                          std::uint64_t split_seed);

/// data/{train,val,test}/img_%05d.pgm and msk_%05d.pgm; unlabeled training
/// masks under data/sealed/; manifest.json lists ids and labeled flags.
void write_dataset(const DatasetSplit& split, const std::filesystem::path& root);
DatasetSplit read_dataset(const std::filesystem::path& root);

}  // namespace switchlab
