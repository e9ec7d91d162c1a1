#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "switchlab/error.hpp"
#include "switchlab/metrics.hpp"
#include "switchlab/pseudo.hpp"
#include "switchlab/synthdata.hpp"

using namespace switchlab;
namespace fs = std::filesystem;

namespace {

SynthConfig small(int size = 64, int count = 40) {
    SynthConfig c;
    c.height = c.width = size;
    c.count = count;
    return c;
}

}  // namespace

TEST(SynthConfig, Validation) {
    EXPECT_NO_THROW(SynthConfig{}.validate());
    SynthConfig c;
    c.count = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = SynthConfig{};
    c.roi_max = 0.95;
    EXPECT_THROW(c.validate(), ConfigError);
    c = SynthConfig{};
    c.roi_min = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = SynthConfig{};
    c.shadow_prob = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Generate, SameSeedSameSample) {
    Rng a(5), b(5);
    const auto sa = generate_sample(small(), a), sb = generate_sample(small(), b);
    EXPECT_EQ(sa.first, sb.first);
    EXPECT_EQ(sa.second, sb.second);
    const Sample i1 = generate_item(small(), 17), i2 = generate_item(small(), 17);
    EXPECT_EQ(i1.image, i2.image);
    EXPECT_NE(generate_item(small(), 18).image, i1.image);
}

TEST(Generate, ValuesInRangeAndEightBit) {
    for (int id = 0; id < 20; ++id) {
        const Sample s = generate_item(small(), id);
        for (double v : s.image) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
            ASSERT_NEAR(v * 255.0, std::round(v * 255.0), 1e-9);
        }
    }
}

TEST(Generate, NoiseFreeImageIsDarkInsideTheRoi) {
    SynthConfig c = small();
    c.speckle = 0.0;
    c.shadow_prob = 0.0;
    for (int id = 0; id < 20; ++id) {
        const Sample s = generate_item(c, id);
        double in = 0, out = 0;
        std::size_t n_in = 0, n_out = 0;
        for (std::size_t i = 0; i < s.image.size(); ++i) (s.mask[i] ? (in += s.image[i], ++n_in) : (out += s.image[i], ++n_out));
        ASSERT_GT(n_in, 0u);
        EXPECT_LT(in / double(n_in), out / double(n_out)) << id;
    }
}

TEST(Generate, OneComponentWithinAreaRange) {
    const SynthConfig c = small(64, 200);
    for (int id = 0; id < 200; ++id) {
        const Sample s = generate_item(c, id);
        ASSERT_EQ(count_components(s.mask), 1) << id;
        const double hw = 64.0 * 64.0;
        const double frac = double(count_foreground(s.mask)) / hw;
        // Lobe deformation (up to 8% of the radius) and pixelisation along the boundary.
        const double edge = double(count_true(boundary(s.mask))) / hw;
        EXPECT_GE(frac, c.roi_min * 0.84 - edge) << id;
        EXPECT_LE(frac, c.roi_max * 1.17 + edge) << id;
    }
}

TEST(Generate, RoiDarkerThanBackgroundByContrast) {
    const SynthConfig c = small(64, 100);
    for (int id = 0; id < 100; ++id) {
        const Sample s = generate_item(c, id);
        double in = 0, out = 0;
        std::size_t n_in = 0, n_out = 0;
        for (std::size_t i = 0; i < s.image.size(); ++i) (s.mask[i] ? (in += s.image[i], ++n_in) : (out += s.image[i], ++n_out));
        EXPECT_GE(out / double(n_out) - in / double(n_in), c.contrast) << id;
    }
}

TEST(Split, CountsFollowTheFloorRule) {
    const SplitCounts a = split_counts(250, 0.05, SplitRatios{});
    EXPECT_EQ(a.train, 200);
    EXPECT_EQ(a.labeled, 10);
    const SplitCounts b = split_counts(500, 0.05, SplitRatios{});
    EXPECT_EQ(b.train, 400);
    EXPECT_EQ(b.val, 50);
    EXPECT_EQ(b.test, 50);
    EXPECT_EQ(b.labeled, 20);
    EXPECT_EQ(split_counts(500, 1.0, SplitRatios{}).labeled, 400);
    EXPECT_THROW(split_counts(10, 0.05, SplitRatios{}), ConfigError);
    EXPECT_THROW(split_counts(100, 0.5, SplitRatios{0.5, 0.3, 0.3}), ConfigError);
    EXPECT_THROW(split_counts(100, 0.0, SplitRatios{}), ConfigError);
}

TEST(Split, DisjointDeterministicAndSealed) {
    const SynthConfig c = small(16, 100);
    const DatasetSplit d = make_dataset(c, 0.1, SplitRatios{}, 3);
    EXPECT_EQ(d.labeled.size(), 8u);
    EXPECT_EQ(d.unlabeled.size(), 72u);
    EXPECT_EQ(d.val.size(), 10u);
    EXPECT_EQ(d.test.size(), 10u);
    std::set<int> ids;
    for (const auto& s : d.labeled) ids.insert(s.id);
    for (const auto& u : d.unlabeled) ids.insert(u.id);
    for (const auto& s : d.val) ids.insert(s.id);
    for (const auto& s : d.test) ids.insert(s.id);
    EXPECT_EQ(ids.size(), 100u);
    EXPECT_EQ(d.sealed.size(), d.unlabeled.size());
    EXPECT_EQ(d.sealed.access_count(), 0u);
    // Item content depends only on the id, not on the partition.
    EXPECT_EQ(d.val[0].image, generate_item(c, d.val[0].id).image);
    EXPECT_EQ(d.sealed.reveal(d.unlabeled[0].id), generate_item(c, d.unlabeled[0].id).mask);
    EXPECT_EQ(d.sealed.access_count(), 1u);

    const DatasetSplit again = make_dataset(c, 0.1, SplitRatios{}, 3);
    for (std::size_t i = 0; i < d.labeled.size(); ++i) EXPECT_EQ(again.labeled[i].id, d.labeled[i].id);
    const DatasetSplit other = make_dataset(c, 0.1, SplitRatios{}, 4);
    bool differs = false;
    for (std::size_t i = 0; i < d.labeled.size(); ++i) differs |= other.labeled[i].id != d.labeled[i].id;
    EXPECT_TRUE(differs);
    EXPECT_THROW(d.sealed.reveal(-1), std::out_of_range);
}

TEST(Split, FullRatioLabelsEverything) {
    const DatasetSplit d = make_dataset(small(16, 20), 1.0, SplitRatios{}, 1);
    EXPECT_EQ(d.labeled.size(), 16u);
    EXPECT_TRUE(d.unlabeled.empty());
}

TEST(Disk, RoundTrip) {
    const fs::path root = fs::temp_directory_path() / "switchlab_test_synth";
    fs::remove_all(root);
    const DatasetSplit d = make_dataset(small(16, 20), 0.25, SplitRatios{}, 2);
    write_dataset(d, root);
    EXPECT_TRUE(fs::exists(root / "manifest.json"));
    char name[32];
    std::snprintf(name, sizeof name, "img_%05d.pgm", d.val[0].id);
    EXPECT_TRUE(fs::exists(root / "val" / name));
    std::snprintf(name, sizeof name, "msk_%05d.pgm", d.unlabeled[0].id);
    EXPECT_TRUE(fs::exists(root / "sealed" / name));
    EXPECT_FALSE(fs::exists(root / "train" / name));
    const DatasetSplit r = read_dataset(root);
    ASSERT_EQ(r.labeled.size(), d.labeled.size());
    ASSERT_EQ(r.unlabeled.size(), d.unlabeled.size());
    for (std::size_t i = 0; i < d.labeled.size(); ++i) {
        EXPECT_EQ(r.labeled[i].image, d.labeled[i].image);
        EXPECT_EQ(r.labeled[i].mask, d.labeled[i].mask);
    }
    for (std::size_t i = 0; i < d.unlabeled.size(); ++i) EXPECT_EQ(r.unlabeled[i].image, d.unlabeled[i].image);
    for (std::size_t i = 0; i < d.test.size(); ++i) EXPECT_EQ(r.test[i].mask, d.test[i].mask);
    EXPECT_EQ(r.sealed.size(), d.sealed.size());
    EXPECT_EQ(r.sealed.access_count(), 0u);
    EXPECT_THROW(read_dataset(root / "nowhere"), DataError);
}
