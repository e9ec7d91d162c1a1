#include "switchlab/mss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "switchlab/error.hpp"

namespace switchlab {

void MssConfig::validate() const {
    if (coarse_count < 0 || fine_count < 0) throw ConfigError("mss: patch counts must be non-negative");
    if (coarse_count + fine_count < 1) throw ConfigError("mss: need at least one patch (p + q >= 1)");
    if (coarse_size <= 0 || fine_size <= 0) throw ConfigError("mss: patch sizes must be positive");
}

namespace {

void paint_square(BinaryMask& m, int top, int left, int side) {
    for (int r = top; r < top + side; ++r)
        std::fill_n(&m(r, left), side, std::uint8_t{1});
}

void paint_random_squares(BinaryMask& m, int count, int side, Rng& rng) {
    for (int i = 0; i < count; ++i) {
        const int top = uniform_int(rng, 0, m.height() - side);
        const int left = uniform_int(rng, 0, m.width() - side);
        paint_square(m, top, left, side);
    }
}

}  // namespace

BinaryMask generate_multiscale_mask(int h, int w, const MssConfig& cfg, Rng& rng) {
    cfg.validate();
    const int limit = std::min(h, w);
    if (cfg.coarse_size > limit || cfg.fine_size > limit)
        throw std::invalid_argument("generate_multiscale_mask: patch size " +
                                    std::to_string(std::max(cfg.coarse_size, cfg.fine_size)) +
                                    " does not fit in " + std::to_string(h) + "x" + std::to_string(w));
    BinaryMask m(h, w);
    paint_random_squares(m, cfg.coarse_count, cfg.coarse_size, rng);
    paint_random_squares(m, cfg.fine_count, cfg.fine_size, rng);
    return m;
}

BinaryMask generate_bcp_mask(int h, int w, double side_ratio, Rng& rng) {
    if (!(side_ratio > 0.0 && side_ratio <= 1.0)) throw std::invalid_argument("generate_bcp_mask: side_ratio must be in (0, 1]");
    const int side = std::max(1, static_cast<int>(std::floor(side_ratio * std::min(h, w))));
    BinaryMask m(h, w);
    paint_random_squares(m, 1, side, rng);
    return m;
}

SwitchedPair switch_pair(const Image& x1, const Image& x2, const Image& u1, const Image& u2, const BinaryMask& m) {
    require_same_shape(x1, x2, "switch_pair");
    require_same_shape(x1, u1, "switch_pair");
    require_same_shape(x1, u2, "switch_pair");
    return SwitchedPair{compose_masked(u1, x1, m), compose_masked(x2, u2, m), m};
}

double max_coverage_fraction(const MssConfig& cfg, int h, int w) {
    const double area = static_cast<double>(cfg.coarse_count) * cfg.coarse_size * cfg.coarse_size +
                        static_cast<double>(cfg.fine_count) * cfg.fine_size * cfg.fine_size;
    return std::min(1.0, area / (static_cast<double>(h) * w));
}

Field switch_probability_map(const MaskSampler& sampler, int n_iter, Rng& rng) {
    if (n_iter < 1) throw std::invalid_argument("switch_probability_map: n_iter must be >= 1");
    std::vector<std::uint32_t> hits;
    int h = 0, w = 0;
    for (int it = 0; it < n_iter; ++it) {
        const BinaryMask m = sampler(rng);
        if (it == 0) {
            h = m.height();
            w = m.width();
            hits.assign(m.size(), 0);
        } else if (m.height() != h || m.width() != w) {
            throw std::invalid_argument("switch_probability_map: sampler changed mask shape");
        }
        for (std::size_t i = 0; i < m.size(); ++i) hits[i] += m[i];
    }
    Field out(h, w);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(hits[i]) / n_iter;
    return out;
}

namespace {

// numpy.gradient semantics with unit spacing.
double diff_along(const Field& f, int r, int c, bool vertical) {
    const int n = vertical ? f.height() : f.width();
    const int i = vertical ? r : c;
    auto at = [&](int k) { return vertical ? f(k, c) : f(r, k); };
    if (n < 2) return 0.0;
    if (i == 0) return at(1) - at(0);
    if (i == n - 1) return at(n - 1) - at(n - 2);
    return 0.5 * (at(i + 1) - at(i - 1));
}

}  // namespace

double mask_gradient_variance(const Field& map) {
    if (map.empty()) return 0.0;
    const std::size_t n = map.size();
    std::vector<double> mag;
    mag.reserve(n);
    for (int r = 0; r < map.height(); ++r)
        for (int c = 0; c < map.width(); ++c) mag.push_back(std::hypot(diff_along(map, r, c, true), diff_along(map, r, c, false)));
    double mean = 0.0;
    for (double v : mag) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : mag) var += (v - mean) * (v - mean);
    return var / static_cast<double>(n);
}

FieldStats field_stats(const Field& map) {
    FieldStats s;
    if (map.empty()) return s;
    for (double v : map) s.mean += v;
    s.mean /= static_cast<double>(map.size());
    double var = 0.0;
    for (double v : map) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(map.size()));
    return s;
}

}  // namespace switchlab
