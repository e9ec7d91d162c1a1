#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "switchlab/grid.hpp"

using namespace switchlab;

TEST(Softmax, SymmetricLogitsGiveHalf) {
    Logits l(1, 2, 1, 1);
    const ProbMap p = softmax_channels(l);
    EXPECT_DOUBLE_EQ(p(0, 0, 0, 0), 0.5);
    EXPECT_DOUBLE_EQ(p(0, 1, 0, 0), 0.5);
}

TEST(Softmax, LogThreeVersusZero) {
    Logits l(1, 2, 1, 1);
    l(0, 0, 0, 0) = std::log(3.0);
    const ProbMap p = softmax_channels(l);
    EXPECT_NEAR(p(0, 0, 0, 0), 0.75, 1e-15);
    EXPECT_NEAR(p(0, 1, 0, 0), 0.25, 1e-15);
}

TEST(Softmax, ShiftInvariant) {
    Rng rng(3);
    Logits a(2, 2, 3, 4), b(2, 2, 3, 4);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = uniform_real(rng, -5, 5);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 4; ++x) b(n, c, y, x) = a(n, c, y, x) + 7.25;
    const ProbMap pa = softmax_channels(a), pb = softmax_channels(b);
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa.data()[i], pb.data()[i], 1e-14);
}

TEST(Softmax, NormalizedForWideLogits) {
    Rng rng(11);
    Logits l(3, 2, 8, 8);
    for (auto& v : l.values()) v = uniform_real(rng, -50, 50);
    const ProbMap p = softmax_channels(l);
    for (int n = 0; n < 3; ++n)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                EXPECT_NEAR(p(n, 0, y, x) + p(n, 1, y, x), 1.0, 1e-6);
                EXPECT_GE(p(n, 0, y, x), 0.0);
            }
}

TEST(Softmax, RejectsNonFinite) {
    Logits l(1, 2, 2, 2);
    l(0, 1, 1, 1) = std::nan("");
    EXPECT_THROW(softmax_channels(l), std::domain_error);
    l(0, 1, 1, 1) = INFINITY;
    EXPECT_THROW(softmax_channels(l), std::domain_error);
}

TEST(Argmax, TiesGoToBackground) {
    ProbMap p(1, 2, 1, 3);
    p(0, 0, 0, 0) = 0.9, p(0, 1, 0, 0) = 0.1;
    p(0, 0, 0, 1) = 0.1, p(0, 1, 0, 1) = 0.9;
    p(0, 0, 0, 2) = 0.5, p(0, 1, 0, 2) = 0.5;
    const LabelMask m = argmax_channels(p);
    EXPECT_EQ(m(0, 0), 0);
    EXPECT_EQ(m(0, 1), 1);
    EXPECT_EQ(m(0, 2), 0);
}

TEST(Argmax, SoftmaxThenArgmaxEqualsRawArgmax) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Logits l(2, 2, 6, 5);
        for (auto& v : l.values()) v = uniform_real(rng, -20, 20);
        for (int n = 0; n < 2; ++n) EXPECT_EQ(argmax_channels(softmax_channels(l), n), argmax_channels(l, n));
    }
}

TEST(Compose, Identities) {
    Rng rng(8);
    const Image a = fixtures::random_image(7, 9, rng), b = fixtures::random_image(7, 9, rng);
    const BinaryMask m = fixtures::random_mask(7, 9, rng);
    EXPECT_EQ(compose_masked(a, a, m), a);
    EXPECT_EQ(compose_masked(a, b, BinaryMask(7, 9, 1)), a);
    EXPECT_EQ(compose_masked(a, b, BinaryMask(7, 9, 0)), b);
    EXPECT_EQ(compose_masked(a, b, m), compose_masked(b, a, complement(m)));
    const Image ab = compose_masked(a, b, m), ba = compose_masked(b, a, m);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(ab[i] + ba[i], a[i] + b[i]);
}

TEST(Compose, LabelsFollowMask) {
    Rng rng(9);
    const LabelMask a = fixtures::random_labels(5, 5, rng), b = fixtures::random_labels(5, 5, rng);
    const BinaryMask m = fixtures::random_mask(5, 5, rng);
    const LabelMask c = compose_masked(a, b, m);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], m[i] ? a[i] : b[i]);
}

TEST(Compose, ShapeMismatchThrows) {
    EXPECT_THROW(compose_masked(Image(3, 3), Image(3, 4), BinaryMask(3, 3)), std::invalid_argument);
    EXPECT_THROW(compose_masked(Image(3, 3), Image(3, 3), BinaryMask(2, 3)), std::invalid_argument);
}

TEST(BinaryMaskOps, ComplementIsInvolutionAndPartitions) {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const BinaryMask m = fixtures::random_mask(6, 11, rng, 0.3);
        EXPECT_EQ(complement(complement(m)), m);
        EXPECT_EQ(count_true(m) + count_true(complement(m)), m.size());
    }
}

TEST(GridShape, DataLengthChecked) {
    EXPECT_THROW(Image(2, 3, std::vector<double>(5)), std::invalid_argument);
    EXPECT_NO_THROW(Image(2, 3, std::vector<double>(6)));
}
