#pragma once

// Multiscale switch: masks built from a union of coarse and fine square
// patches, the bidirectional labeled/unlabeled image switch, and the Monte
// Carlo statistics used to compare switching strategies.

#include <functional>

#include "switchlab/grid.hpp"
#include "switchlab/random.hpp"

namespace switchlab {

struct MssConfig {
    int coarse_count = 2;   // p
    int fine_count = 2;     // q
    int coarse_size = 128;  // s_c
    int fine_size = 32;     // s_f

    /// Throws ConfigError unless p,q >= 0, p+q >= 1 and sizes are positive.
    void validate() const;
};

/// Union of `coarse_count` squares of side `coarse_size` and `fine_count`
/// squares of side `fine_size`. Upper-left corners are drawn uniformly from
/// [0, h-s] x [0, w-s], coarse patches first, row before column.
BinaryMask generate_multiscale_mask(int h, int w, const MssConfig& cfg, Rng& rng);

/// Single uniformly placed square of side floor(side_ratio * min(h, w)).
BinaryMask generate_bcp_mask(int h, int w, double side_ratio, Rng& rng);

struct SwitchedPair {
    Image u_x;  // u1 inside the mask, x1 outside
    Image x_u;  // x2 inside the mask, u2 outside
    BinaryMask mask;
};

SwitchedPair switch_pair(const Image& x1, const Image& x2, const Image& u1, const Image& u2, const BinaryMask& m);

/// Largest fraction of an h*w image the patches can cover (no overlap), capped at 1.
double max_coverage_fraction(const MssConfig& cfg, int h, int w);

using MaskSampler = std::function<BinaryMask(Rng&)>;

/// Per-pixel fraction of `n_iter` sampled masks in which the pixel is true.
Field switch_probability_map(const MaskSampler& sampler, int n_iter, Rng& rng);

/// Population variance of the gradient magnitude of `map`. Gradients use
/// central differences in the interior and one-sided differences on borders.
double mask_gradient_variance(const Field& map);

struct FieldStats {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation over pixels
};

FieldStats field_stats(const Field& map);

}  // namespace switchlab
