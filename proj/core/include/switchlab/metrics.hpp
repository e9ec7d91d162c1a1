#pragma once

// Overlap and boundary-distance metrics for binary segmentations.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "switchlab/grid.hpp"

namespace switchlab {

/// 100 * 2|P∩G| / (|P|+|G|); 100 when both masks are empty.
double dice_coef(const LabelMask& pred, const LabelMask& gt);

/// 100 * |P∩G| / |P∪G|; 100 when both masks are empty.
double iou(const LabelMask& pred, const LabelMask& gt);

/// Foreground pixels with a 4-neighbour in the background or outside the image.
BinaryMask boundary(const LabelMask& m);

/// Directed nearest Euclidean distances from every boundary pixel of `from`
/// to the boundary of `to`, in raster order. Empty when either is empty.
std::vector<double> directed_boundary_distances(const LabelMask& from, const LabelMask& to);

enum class Hd95Mode {
    pooled,       // 95th percentile of both directions pooled together
    max_directed, // max of the two directed 95th percentiles
};

/// Percentile with linear interpolation between order statistics (q in [0,100]).
double percentile(std::vector<double> values, double q);

/// nullopt when either mask has no foreground.
std::optional<double> hd95(const LabelMask& pred, const LabelMask& gt, Hd95Mode mode = Hd95Mode::pooled);
std::optional<double> asd(const LabelMask& pred, const LabelMask& gt);

struct ImageMetrics {
    std::string id;
    double dice = 0.0;
    double iou = 0.0;
    std::optional<double> hd95;
    std::optional<double> asd;
};

struct MetricReport {
    std::vector<ImageMetrics> per_image;
    double mean_dice = 0.0;
    double mean_iou = 0.0;
    double mean_hd95 = 0.0;   // over images where it is defined
    double mean_asd = 0.0;
    std::size_t undefined_distance_count = 0;  // images excluded from the distance means
};

ImageMetrics evaluate_pair(const LabelMask& pred, const LabelMask& gt, std::string id = {},
                           Hd95Mode mode = Hd95Mode::pooled);

/// Aggregates in the given order.
MetricReport aggregate(std::vector<ImageMetrics> per_image);

}  // namespace switchlab
