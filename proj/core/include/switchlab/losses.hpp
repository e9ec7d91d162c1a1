#pragma once

// Loss functions for two-class segmentation and feature contrast.
//
// Batched losses treat a Logits tensor of n samples as one pool of pixels:
// Dice sums over every pixel of the batch, CE is the weighted mean over the
// batch. Functions that take `grad` accumulate `scale * dLoss/dInput` into
// it when it is non-null; the tensor must already have the input's shape.

#include <cstdint>
#include <span>
#include <vector>

#include "switchlab/grid.hpp"

namespace switchlab {

struct LossWeights {
    double w_b = 1.0;             // base-area weight (region inside the switch mask)
    double w_p = 0.5;             // patch-area weight (complement region)
    double lambda_cont = 0.1;
    double lambda_consist = 0.1;
    double tau = 0.07;
    double epsilon = 1e-5;        // Dice smoothing
    /// Add the positive pair to the InfoNCE denominator (conventional form).
    /// Off by default: negatives only, i.e. the sum runs over j != i.
    bool include_positive_in_denominator = false;

    void validate() const;
};

/// Concatenates label masks into one flat pixel array (sample-major).
std::vector<std::uint8_t> flatten_labels(std::span<const LabelMask> labels);

/// 1 - (2 sum w p g + eps) / (sum w p + sum w g + eps). Returns 0 when every
/// weight is zero. `grad_prob`, when non-empty, receives += scale * dL/dp.
double dice_loss(std::span<const double> prob_fg, std::span<const std::uint8_t> gt, std::span<const double> weights,
                 double eps, std::span<double> grad_prob = {}, double scale = 1.0);
double dice_loss(const Field& prob_fg, const LabelMask& gt, const Field& weights, double eps = 1e-5);

/// Weighted mean of -log softmax(true class), normalized by the weight sum.
double cross_entropy_loss(const Logits& logits, std::span<const std::uint8_t> gt, std::span<const double> weights,
                          Logits* grad = nullptr, double scale = 1.0);
double cross_entropy_loss(const Logits& logits, const LabelMask& gt, const Field& weights);

/// Dice on the softmax foreground channel, differentiated back to logits.
double dice_loss_logits(const Logits& logits, std::span<const std::uint8_t> gt, std::span<const double> weights,
                        double eps, Logits* grad = nullptr, double scale = 1.0);

struct RegionLossTerms {
    double dice = 0.0;  // w_b * Dice(mask region) + w_p * Dice(complement)
    double ce = 0.0;    // same weighting for cross-entropy
    double value() const noexcept { return 0.5 * (dice + ce); }
};

/// Region-weighted Dice/CE terms of a mixed prediction. `base` supervises the
/// pixels inside `m` with weight w_b, `patch` the complement with weight w_p.
/// The same mask applies to every sample of the batch. Gradient is of value().
RegionLossTerms mixed_region_terms(const Logits& pred, std::span<const LabelMask> base,
                                   std::span<const LabelMask> patch, const BinaryMask& m, const LossWeights& w,
                                   Logits* grad = nullptr, double scale = 1.0);

double mixed_region_loss(const Logits& pred, const LabelMask& base_label, const LabelMask& patch_label,
                         const BinaryMask& m, const LossWeights& w);

/// Mean of the four Dice/CE components of the two mixed predictions.
double mss_loss(double dice_ux, double ce_ux, double dice_xu, double ce_xu) noexcept;

/// InfoNCE over spatial positions within each sample, raw dot-product
/// similarity. `h_r` is treated as a constant; gradient flows into `h` only.
/// Throws std::invalid_argument when fewer than two positions exist.
double infonce_contrastive(const Embedding& h, const Embedding& h_r, double tau,
                           bool include_positive_in_denominator = false, Embedding* grad = nullptr,
                           double scale = 1.0);

/// Mean squared difference between two logit tensors.
double consistency_mse(const Logits& a, const Logits& b, Logits* grad_a = nullptr, Logits* grad_b = nullptr,
                       double scale = 1.0);

double total_loss(double mss, double cont, double consist, const LossWeights& w) noexcept;

/// (Dice + CE) / 2 with uniform pixel weights.
double pretrain_loss(const Logits& logits, std::span<const LabelMask> gt, double eps = 1e-5, Logits* grad = nullptr,
                     double scale = 1.0);
double pretrain_loss(const Logits& logits, const LabelMask& gt, double eps = 1e-5);

}  // namespace switchlab
