#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "switchlab/pseudo.hpp"

using namespace switchlab;

namespace {

std::vector<std::uint8_t> raw(const LabelMask& m) { return {m.begin(), m.end()}; }

Logits logits_from_fg(const Field& fg_logit) {
    Logits l(1, 2, fg_logit.height(), fg_logit.width());
    for (int r = 0; r < fg_logit.height(); ++r)
        for (int c = 0; c < fg_logit.width(); ++c) l(0, 1, r, c) = fg_logit(r, c);
    return l;
}

}  // namespace

TEST(Lcc, EmptyAndSingleComponent) {
    EXPECT_EQ(largest_connected_component(LabelMask(5, 5)), LabelMask(5, 5));
    const LabelMask one = fixtures::rect_labels(8, 8, 2, 1, 5, 6);
    EXPECT_EQ(largest_connected_component(one), one);
    EXPECT_EQ(count_components(one), 1);
    EXPECT_EQ(count_components(LabelMask(3, 3)), 0);
}

TEST(Lcc, EqualSizeTieKeepsFirstInRasterOrder) {
    LabelMask m = fixtures::rect_labels(16, 16, 10, 10, 12, 12);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) m(r, c) = 1;
    const LabelMask out = largest_connected_component(m);
    EXPECT_EQ(out, fixtures::rect_labels(16, 16, 0, 0, 2, 2));
}

TEST(Lcc, DiagonalNeighboursAreSeparate) {
    LabelMask m(3, 3);
    m(0, 0) = m(1, 1) = m(2, 2) = 1;
    EXPECT_EQ(count_components(m), 3);
    EXPECT_EQ(count_foreground(largest_connected_component(m)), 1u);
}

TEST(Lcc, ExhaustiveFourByFourAgainstFloodFill) {
    for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
        LabelMask m(4, 4);
        for (int i = 0; i < 16; ++i) m[static_cast<std::size_t>(i)] = (bits >> i) & 1u;
        const auto expect = oracle::flood_fill_lcc(raw(m), 4, 4);
        const LabelMask got = largest_connected_component(m);
        ASSERT_EQ(raw(got), expect) << "mask bits " << bits;
        ASSERT_EQ(count_components(m), oracle::count_components(raw(m), 4, 4)) << bits;
    }
}

TEST(Lcc, RandomMasksIdempotentSubsetSingleComponent) {
    Rng rng(11);
    for (int t = 0; t < 1000; ++t) {
        const LabelMask m = fixtures::random_labels(32, 32, rng, 0.45);
        const LabelMask l = largest_connected_component(m);
        ASSERT_EQ(largest_connected_component(l), l);
        for (std::size_t i = 0; i < m.size(); ++i) ASSERT_LE(l[i], m[i]);
        ASSERT_LE(oracle::count_components(raw(l), 32, 32), 1);
        ASSERT_EQ(raw(l), oracle::flood_fill_lcc(raw(m), 32, 32));
    }
}

TEST(PseudoLabel, UniformLogitsGiveEmptyMask) {
    const auto teacher = [](const Image& img) { return Logits(1, 2, img.height(), img.width()); };
    const PseudoLabel pl = predict_pseudo_label(teacher, Image(8, 8));
    EXPECT_EQ(count_foreground(pl.mask), 0u);
    EXPECT_EQ(pl.source_confidence, 0.0);
}

TEST(PseudoLabel, ConfidentForegroundEverywhere) {
    const auto teacher = [](const Image& img) { return logits_from_fg(Field(img.height(), img.width(), 10.0)); };
    const PseudoLabel pl = predict_pseudo_label(teacher, Image(6, 7));
    EXPECT_EQ(count_foreground(pl.mask), 42u);
    EXPECT_NEAR(pl.source_confidence, 1.0 / (1.0 + std::exp(-10.0)), 1e-15);
}

TEST(PseudoLabel, KeepsLargerOfTwoBlobs) {
    Field fg(12, 12, -5.0);
    for (int r = 1; r < 4; ++r)
        for (int c = 1; c < 4; ++c) fg(r, c) = 5.0;  // 9 pixels
    for (int r = 8; r < 10; ++r)
        for (int c = 8; c < 10; ++c) fg(r, c) = 5.0;  // 4 pixels
    const PseudoLabel pl = pseudo_label_from_logits(logits_from_fg(fg));
    LabelMask argmax(12, 12);
    for (std::size_t i = 0; i < fg.size(); ++i) argmax[i] = fg[i] > 0;
    EXPECT_EQ(raw(pl.mask), oracle::flood_fill_lcc(raw(argmax), 12, 12));
    EXPECT_EQ(pl.mask, fixtures::rect_labels(12, 12, 1, 1, 4, 4));
}

TEST(PseudoLabel, ShapeMismatchRejected) {
    const auto teacher = [](const Image&) { return Logits(1, 2, 4, 4); };
    EXPECT_THROW(predict_pseudo_label(teacher, Image(8, 8)), std::invalid_argument);
    EXPECT_THROW(pseudo_label_from_logits(Logits(1, 3, 4, 4)), std::invalid_argument);
}
