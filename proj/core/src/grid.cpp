#include "switchlab/grid.hpp"

#include <algorithm>
#include <cmath>

namespace switchlab {

ProbMap softmax_channels(const Logits& logits) {
    const int n = logits.batch(), c = logits.channels();
    const std::size_t hw = logits.plane();
    ProbMap out(n, c, logits.height(), logits.width());
    for (int b = 0; b < n; ++b) {
        for (std::size_t p = 0; p < hw; ++p) {
            double mx = -INFINITY;
            for (int k = 0; k < c; ++k) {
                const double z = logits.plane_ptr(b, k)[p];
                if (!std::isfinite(z)) throw std::domain_error("softmax_channels: non-finite logit");
                mx = std::max(mx, z);
            }
            double sum = 0.0;
            for (int k = 0; k < c; ++k) {
                const double e = std::exp(logits.plane_ptr(b, k)[p] - mx);
                out.plane_ptr(b, k)[p] = e;
                sum += e;
            }
            for (int k = 0; k < c; ++k) out.plane_ptr(b, k)[p] /= sum;
        }
    }
    return out;
}

namespace {

template <typename T>
LabelMask argmax_impl(const T& t, int n) {
    if (n < 0 || n >= t.batch()) throw std::out_of_range("argmax_channels: sample index");
    LabelMask out(t.height(), t.width());
    const std::size_t hw = t.plane();
    for (std::size_t p = 0; p < hw; ++p) {
        int best = 0;
        double best_v = t.plane_ptr(n, 0)[p];
        for (int k = 1; k < t.channels(); ++k) {
            const double v = t.plane_ptr(n, k)[p];
            if (v > best_v) {  // strict: ties keep the lower class
                best_v = v;
                best = k;
            }
        }
        out[p] = static_cast<std::uint8_t>(best);
    }
    return out;
}

}  // namespace

LabelMask argmax_channels(const ProbMap& probs, int n) { return argmax_impl(probs, n); }
LabelMask argmax_channels(const Logits& logits, int n) { return argmax_impl(logits, n); }

Field foreground_plane(const ProbMap& probs, int n) {
    if (probs.channels() < 2) throw std::invalid_argument("foreground_plane: need at least two channels");
    const double* src = probs.plane_ptr(n, 1);
    return Field(probs.height(), probs.width(), std::vector<double>(src, src + probs.plane()));
}

BinaryMask complement(const BinaryMask& m) {
    BinaryMask out(m.height(), m.width());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0 : 1;
    return out;
}

std::size_t count_true(const BinaryMask& m) {
    return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }));
}

std::size_t count_foreground(const LabelMask& m) {
    return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }));
}

FeatureMap stack_images(std::span<const Image> images) {
    if (images.empty()) return {};
    const int h = images.front().height(), w = images.front().width();
    FeatureMap out(static_cast<int>(images.size()), 1, h, w);
    for (std::size_t i = 0; i < images.size(); ++i) {
        require_same_shape(images[i], images.front(), "stack_images");
        std::copy(images[i].begin(), images[i].end(), out.plane_ptr(static_cast<int>(i), 0));
    }
    return out;
}

Image to_image(const Field& f) { return Image(f.height(), f.width(), f.vec()); }
Field to_field(const Image& img) { return Field(img.height(), img.width(), img.vec()); }

}  // namespace switchlab
