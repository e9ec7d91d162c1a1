#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "switchlab/metrics.hpp"

using namespace switchlab;

namespace {

std::vector<std::uint8_t> raw(const LabelMask& m) { return {m.begin(), m.end()}; }

LabelMask pixel(int h, int w, int r, int c) {
    LabelMask m(h, w);
    m(r, c) = 1;
    return m;
}

}  // namespace

TEST(Overlap, HandCases) {
    const LabelMask a = fixtures::rect_labels(8, 8, 1, 1, 5, 5);
    EXPECT_EQ(dice_coef(a, a), 100.0);
    EXPECT_EQ(iou(a, a), 100.0);
    EXPECT_EQ(dice_coef(LabelMask(4, 4), LabelMask(4, 4)), 100.0);
    EXPECT_EQ(iou(LabelMask(4, 4), LabelMask(4, 4)), 100.0);
    const LabelMask b = fixtures::rect_labels(8, 8, 6, 6, 8, 8);
    EXPECT_EQ(dice_coef(a, b), 0.0);
    EXPECT_EQ(iou(a, b), 0.0);
    // |P| = |G| = 8, overlap 4.
    const LabelMask p = fixtures::rect_labels(8, 8, 0, 0, 2, 4), g = fixtures::rect_labels(8, 8, 0, 2, 2, 6);
    EXPECT_DOUBLE_EQ(dice_coef(p, g), 50.0);
    EXPECT_NEAR(iou(p, g), 100.0 * 4.0 / 12.0, 1e-12);
    EXPECT_THROW(dice_coef(a, LabelMask(8, 7)), std::invalid_argument);
}

TEST(Distances, HandCases) {
    const LabelMask a = fixtures::rect_labels(10, 10, 2, 2, 7, 7);
    EXPECT_EQ(hd95(a, a).value(), 0.0);
    EXPECT_EQ(asd(a, a).value(), 0.0);
    const LabelMask p = pixel(10, 10, 1, 1), q = pixel(10, 10, 4, 5);  // 3-4-5 triangle
    EXPECT_DOUBLE_EQ(hd95(p, q).value(), 5.0);
    EXPECT_DOUBLE_EQ(asd(p, q).value(), 5.0);
    EXPECT_FALSE(hd95(a, LabelMask(10, 10)).has_value());
    EXPECT_FALSE(asd(LabelMask(10, 10), a).has_value());
}

TEST(Boundary, EdgeAndInterior) {
    const LabelMask full(5, 5, 1);
    const BinaryMask b = boundary(full);
    EXPECT_EQ(count_true(b), 16u);  // only the image-edge ring
    EXPECT_EQ(b(2, 2), 0);
    const auto want = oracle::boundary_points(raw(full), 5, 5);
    EXPECT_EQ(want.size(), 16u);
}

TEST(Percentile, LinearInterpolation) {
    EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
    EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 100), 4.0);
    EXPECT_DOUBLE_EQ(percentile({7}, 95), 7.0);
    EXPECT_NEAR(percentile({0, 10}, 95), 9.5, 1e-15);
    EXPECT_THROW(percentile({}, 50), std::invalid_argument);
    EXPECT_THROW(percentile({1}, 101), std::invalid_argument);
}

TEST(MetricOracle, ThousandRandomPairs) {
    Rng rng(1);
    for (int t = 0; t < 1000; ++t) {
        const double pa = uniform_real(rng, 0.05, 0.7), pb = uniform_real(rng, 0.05, 0.7);
        const LabelMask a = fixtures::random_labels(16, 16, rng, pa), b = fixtures::random_labels(16, 16, rng, pb);
        int inter = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            inter += a[i] && b[i];
            na += a[i];
            nb += b[i];
        }
        const double dice = na + nb ? 200.0 * inter / (na + nb) : 100.0;
        const double jac = na + nb - inter ? 100.0 * inter / (na + nb - inter) : 100.0;
        ASSERT_NEAR(dice_coef(a, b), dice, 1e-9);
        ASSERT_NEAR(iou(a, b), jac, 1e-9);
        ASSERT_NEAR(iou(a, b), dice_coef(a, b) / (200.0 - dice_coef(a, b)) * 100.0, 1e-9);
        ASSERT_LE(iou(a, b), dice_coef(a, b) + 1e-12);

        const auto ref = oracle::surface_distances(raw(a), raw(b), 16, 16);
        const auto h = hd95(a, b), s = asd(a, b);
        ASSERT_EQ(h.has_value(), ref.defined);
        if (!ref.defined) continue;
        ASSERT_NEAR(*h, ref.hd95, 1e-9) << t;
        ASSERT_NEAR(*s, ref.asd, 1e-9) << t;
        ASSERT_NEAR(*hd95(b, a), *h, 1e-9);
        ASSERT_NEAR(*asd(b, a), *s, 1e-9);
        ASSERT_LE(*h, ref.hausdorff + 1e-12);
        ASSERT_LE(*s, ref.max_pooled + 1e-12);

        const auto pa_pts = oracle::boundary_points(raw(a), 16, 16), pb_pts = oracle::boundary_points(raw(b), 16, 16);
        const double dmax = std::max(oracle::percentile_linear(oracle::all_pairs_nearest(pa_pts, pb_pts), 95),
                                     oracle::percentile_linear(oracle::all_pairs_nearest(pb_pts, pa_pts), 95));
        ASSERT_NEAR(*hd95(a, b, Hd95Mode::max_directed), dmax, 1e-9);
    }
}

TEST(MetricOracle, DirectedDistancesInRasterOrder) {
    Rng rng(2);
    const LabelMask a = fixtures::random_labels(16, 16, rng, 0.3), b = fixtures::random_labels(16, 16, rng, 0.3);
    const auto got = directed_boundary_distances(a, b);
    const auto want = oracle::all_pairs_nearest(oracle::boundary_points(raw(a), 16, 16),
                                                oracle::boundary_points(raw(b), 16, 16));
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Aggregate, ExcludesUndefinedDistancesWithCount) {
    const LabelMask a = fixtures::rect_labels(8, 8, 1, 1, 4, 4), b = fixtures::rect_labels(8, 8, 2, 2, 5, 5);
    std::vector<ImageMetrics> rows{evaluate_pair(a, b, "0"), evaluate_pair(a, LabelMask(8, 8), "1"),
                                   evaluate_pair(a, a, "2")};
    const MetricReport r = aggregate(rows);
    EXPECT_EQ(r.undefined_distance_count, 1u);
    EXPECT_NEAR(r.mean_dice, (rows[0].dice + 0.0 + 100.0) / 3.0, 1e-12);
    EXPECT_NEAR(r.mean_hd95, (*rows[0].hd95 + 0.0) / 2.0, 1e-12);
    EXPECT_NEAR(r.mean_asd, (*rows[0].asd + 0.0) / 2.0, 1e-12);
    EXPECT_EQ(r.per_image[1].id, "1");
    for (const auto& m : r.per_image) {
        EXPECT_GE(m.dice, 0.0);
        EXPECT_LE(m.dice, 100.0);
        EXPECT_LE(m.iou, m.dice);
    }
}
