#pragma once

#include <cmath>
#include <vector>

#include "switchlab/grid.hpp"
#include "switchlab/random.hpp"

namespace fixtures {

using namespace switchlab;

inline Image random_image(int h, int w, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Image img(h, w);
    for (auto& v : img) v = uniform_real(rng, lo, hi);
    return img;
}

inline LabelMask random_labels(int h, int w, Rng& rng, double p = 0.5) {
    LabelMask m(h, w);
    std::bernoulli_distribution fg(p);
    for (auto& v : m) v = fg(rng);
    return m;
}

inline BinaryMask random_mask(int h, int w, Rng& rng, double p = 0.5) {
    BinaryMask m(h, w);
    std::bernoulli_distribution on(p);
    for (auto& v : m) v = on(rng);
    return m;
}

inline LabelMask rect_labels(int h, int w, int r0, int c0, int r1, int c1) {
    LabelMask m(h, w);
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) m(r, c) = 1;
    return m;
}

inline std::vector<double> as_vector(const Image& img) { return {img.begin(), img.end()}; }

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace fixtures
