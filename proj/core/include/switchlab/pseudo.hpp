#pragma once

// Teacher pseudo-labels: argmax of the softmaxed teacher logits, filtered
// down to the largest 4-connected foreground component.

#include <functional>

#include "switchlab/grid.hpp"

namespace switchlab {

struct PseudoLabel {
    LabelMask mask;
    /// Mean foreground probability over the retained pixels; 0 when empty.
    double source_confidence = 0.0;
};

using TeacherForward = std::function<Logits(const Image&)>;

/// Keeps only the 4-connected foreground component with the most pixels.
/// Equal-size components resolve to the one whose first pixel comes first
/// in row-major order.
LabelMask largest_connected_component(const LabelMask& mask);

/// Number of 4-connected foreground components.
int count_components(const LabelMask& mask);

PseudoLabel pseudo_label_from_logits(const Logits& logits, int n = 0);
PseudoLabel predict_pseudo_label(const TeacherForward& teacher_forward, const Image& img);

}  // namespace switchlab
