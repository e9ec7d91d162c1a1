#pragma once

// Weak (geometric) and strong (intensity) augmentations with paired
// image/label semantics. Intensities live on the [0,1] float scale; 8-bit
// parameters (posterize bits, solarize threshold) are translated onto it.

#include <string_view>
#include <utility>
#include <vector>

#include "switchlab/grid.hpp"
#include "switchlab/random.hpp"

namespace switchlab {

enum class AugKind {
    identity,
    resize_crop,
    hflip,
    vflip,
    autocontrast,
    gaussian_blur,
    contrast,
    brightness,
    sharpness,
    posterize,
    solarize,
};

std::string_view to_string(AugKind kind) noexcept;
bool is_geometric(AugKind kind) noexcept;

/// One augmentation with its parameter:
///   resize_crop: scale in [0.8, 1.2]
///   contrast / brightness / sharpness: factor in [0.75, 1.25]
///   gaussian_blur: sigma in [0.1, 1.0]
///   posterize: bits in [4, 8]
///   solarize: threshold t in [1, 256) on the 8-bit scale; pixels with
///             p > t/256 are inverted
struct AugmentationOp {
    AugKind kind = AugKind::identity;
    double param = 0.0;

    friend bool operator==(const AugmentationOp&, const AugmentationOp&) = default;
};

struct AugmentPolicy {
    bool use_weak = true;
    bool use_strong = true;
    int max_ops = 3;

    void validate() const;
};

/// Draws between 0 and max_ops operations uniformly from the enabled groups,
/// each with a parameter uniform in its range.
std::vector<AugmentationOp> sample_augmentations(const AugmentPolicy& policy, Rng& rng);

/// Geometric ops move image and mask together (mask by nearest neighbour);
/// intensity ops touch the image only and clamp to [0,1].
std::pair<Image, LabelMask> apply_augmentations(const Image& img, const LabelMask& mask,
                                                const std::vector<AugmentationOp>& ops);

Image apply_augmentations(const Image& img, const std::vector<AugmentationOp>& ops);

// Individual operations, exposed for testing.
Image hflip(const Image& img);
Image vflip(const Image& img);
LabelMask hflip(const LabelMask& m);
LabelMask vflip(const LabelMask& m);
Image resize_crop(const Image& img, double scale);
LabelMask resize_crop(const LabelMask& m, double scale);
Image autocontrast(const Image& img);
Image gaussian_blur(const Image& img, double sigma);
Image adjust_contrast(const Image& img, double factor);
Image adjust_brightness(const Image& img, double factor);
Image adjust_sharpness(const Image& img, double factor);
Image posterize(const Image& img, int bits);
Image solarize(const Image& img, double threshold_8bit);

}  // namespace switchlab
