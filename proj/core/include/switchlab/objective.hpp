#pragma once

// Training objectives evaluated through the network, with gradients with
// respect to the flat parameter vector.

#include <span>
#include <vector>

#include "switchlab/grid.hpp"
#include "switchlab/losses.hpp"
#include "switchlab/network.hpp"

namespace switchlab {

/// Which loss terms are active in the self-training objective.
struct LossSpec {
    bool mss = true;
    bool contrastive = true;
    bool consistency = true;
    LossWeights weights;
};

/// One self-training batch after switching. Both mixing directions hold the
/// same number of samples and share `mask`. Inside the mask `*_base` labels
/// supervise (weight w_b), outside it `*_patch` labels (weight w_p).
struct MixedBatch {
    std::vector<Image> u_x, x_u;
    std::vector<LabelMask> ux_base, ux_patch;
    std::vector<LabelMask> xu_base, xu_patch;
    BinaryMask mask;
    // Frequency-switched counterparts, re-mixed with the same mask. Only
    // needed when contrastive or consistency terms are active.
    std::vector<Image> u_x_r, x_u_r;
};

struct LossBreakdown {
    double mss = 0.0;
    double cont = 0.0;
    double consist = 0.0;
    double total = 0.0;
};

/// ½(Dice + CE) over a labeled batch. Adds dL/dtheta to `grad` when given.
double supervised_objective(const SegNet& net, const SegNetParams& params, std::span<const Image> images,
                            std::span<const LabelMask> labels, double eps, std::span<double> grad = {});

/// mss + lambda_cont * cont + lambda_consist * consist, where each term
/// averages the u_x and x_u directions. Contrastive keys come from the
/// frequency-switched branch and are constants for differentiation.
LossBreakdown switch_objective(const SegNet& net, const SegNetParams& params, const MixedBatch& batch,
                               const LossSpec& spec, std::span<double> grad = {});

/// Same objective with the contrastive keys computed from `key_params`.
/// Gradients are taken with respect to `params` only; with
/// key_params == params this equals the overload above.
LossBreakdown switch_objective(const SegNet& net, const SegNetParams& params, const SegNetParams& key_params,
                               const MixedBatch& batch, const LossSpec& spec, std::span<double> grad = {});

}  // namespace switchlab
