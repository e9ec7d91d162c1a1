#include "switchlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace switchlab {

namespace {

struct Overlap {
    std::size_t p = 0, g = 0, both = 0;
};

Overlap overlap(const LabelMask& pred, const LabelMask& gt, const char* what) {
    require_same_shape(pred, gt, what);
    Overlap o;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred[i] != 0, b = gt[i] != 0;
        o.p += a;
        o.g += b;
        o.both += a && b;
    }
    return o;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact squared Euclidean distance transform along one line (Felzenszwalb &
// Huttenlocher lower envelope of parabolas).
void edt_1d(const double* f, int n, double* d, std::vector<int>& v, std::vector<double>& z) {
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        double s = 0.0;
        while (true) {
            const int p = v[static_cast<std::size_t>(k)];
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p));
            if (s > z[static_cast<std::size_t>(k)]) break;
            --k;  // z[0] = -inf, so this stops at k = 0
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
        std::fill(d, d + n, kInf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
        const int p = v[static_cast<std::size_t>(j)];
        d[q] = (q - p) * static_cast<double>(q - p) + f[p];
    }
}

// Squared distance to the nearest true pixel of `sites`.
Field squared_distance_transform(const BinaryMask& sites) {
    const int h = sites.height(), w = sites.width();
    Field out(h, w);
    std::vector<double> f(static_cast<std::size_t>(std::max(h, w))), d(f.size());
    std::vector<int> v;
    std::vector<double> z;
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[static_cast<std::size_t>(r)] = sites(r, c) ? 0.0 : kInf;
        edt_1d(f.data(), h, d.data(), v, z);
        for (int r = 0; r < h; ++r) out(r, c) = d[static_cast<std::size_t>(r)];
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f[static_cast<std::size_t>(c)] = out(r, c);
        edt_1d(f.data(), w, d.data(), v, z);
        for (int c = 0; c < w; ++c) out(r, c) = d[static_cast<std::size_t>(c)];
    }
    return out;
}

}  // namespace

double dice_coef(const LabelMask& pred, const LabelMask& gt) {
    const Overlap o = overlap(pred, gt, "dice_coef");
    if (o.p + o.g == 0) return 100.0;
    return 100.0 * 2.0 * static_cast<double>(o.both) / static_cast<double>(o.p + o.g);
}

double iou(const LabelMask& pred, const LabelMask& gt) {
    const Overlap o = overlap(pred, gt, "iou");
    const std::size_t uni = o.p + o.g - o.both;
    if (uni == 0) return 100.0;
    return 100.0 * static_cast<double>(o.both) / static_cast<double>(uni);
}

BinaryMask boundary(const LabelMask& m) {
    const int h = m.height(), w = m.width();
    BinaryMask b(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!m(r, c)) continue;
            const bool edge = r == 0 || c == 0 || r == h - 1 || c == w - 1;
            b(r, c) = edge || !m(r - 1, c) || !m(r + 1, c) || !m(r, c - 1) || !m(r, c + 1);
        }
    return b;
}

std::vector<double> directed_boundary_distances(const LabelMask& from, const LabelMask& to) {
    require_same_shape(from, to, "directed_boundary_distances");
    const BinaryMask bf = boundary(from), bt = boundary(to);
    std::vector<double> out;
    if (count_true(bf) == 0 || count_true(bt) == 0) return out;
    const Field dt = squared_distance_transform(bt);
    for (std::size_t i = 0; i < bf.size(); ++i)
        if (bf[i]) out.push_back(std::sqrt(dt[i]));
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: no values");
    if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile: q must be in [0, 100]");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::optional<double> hd95(const LabelMask& pred, const LabelMask& gt, Hd95Mode mode) {
    auto a = directed_boundary_distances(pred, gt);
    auto b = directed_boundary_distances(gt, pred);
    if (a.empty() || b.empty()) return std::nullopt;
    if (mode == Hd95Mode::max_directed) return std::max(percentile(std::move(a), 95.0), percentile(std::move(b), 95.0));
    a.insert(a.end(), b.begin(), b.end());
    return percentile(std::move(a), 95.0);
}

std::optional<double> asd(const LabelMask& pred, const LabelMask& gt) {
    const auto a = directed_boundary_distances(pred, gt);
    const auto b = directed_boundary_distances(gt, pred);
    if (a.empty() || b.empty()) return std::nullopt;
    double sum = 0.0;
    for (double v : a) sum += v;
    for (double v : b) sum += v;
    return sum / static_cast<double>(a.size() + b.size());
}

ImageMetrics evaluate_pair(const LabelMask& pred, const LabelMask& gt, std::string id, Hd95Mode mode) {
    ImageMetrics m;
    m.id = std::move(id);
    m.dice = dice_coef(pred, gt);
    m.iou = iou(pred, gt);
    m.hd95 = hd95(pred, gt, mode);
    m.asd = asd(pred, gt);
    return m;
}

MetricReport aggregate(std::vector<ImageMetrics> per_image) {
    MetricReport r;
    r.per_image = std::move(per_image);
    std::size_t defined = 0;
    for (const auto& m : r.per_image) {
        r.mean_dice += m.dice;
        r.mean_iou += m.iou;
        if (m.hd95 && m.asd) {
            r.mean_hd95 += *m.hd95;
            r.mean_asd += *m.asd;
            ++defined;
        } else {
            ++r.undefined_distance_count;
        }
    }
    if (!r.per_image.empty()) {
        r.mean_dice /= static_cast<double>(r.per_image.size());
        r.mean_iou /= static_cast<double>(r.per_image.size());
    }
    if (defined) {
        r.mean_hd95 /= static_cast<double>(defined);
        r.mean_asd /= static_cast<double>(defined);
    }
    return r;
}

}  // namespace switchlab
