#include "switchlab/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "switchlab/error.hpp"

namespace switchlab {

namespace {

constexpr std::array kWeakOps{AugKind::resize_crop, AugKind::hflip, AugKind::vflip};
constexpr std::array kStrongOps{AugKind::autocontrast, AugKind::gaussian_blur, AugKind::contrast, AugKind::brightness,
                                AugKind::sharpness,    AugKind::posterize,     AugKind::solarize};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

template <typename G>
G flip(const G& g, bool horizontal) {
    G out(g.height(), g.width());
    for (int r = 0; r < g.height(); ++r)
        for (int c = 0; c < g.width(); ++c)
            out(r, c) = horizontal ? g(r, g.width() - 1 - c) : g(g.height() - 1 - r, c);
    return out;
}

// Maps output pixel centre `i` of an n-pixel axis to a source coordinate in
// the original image, after scaling by `s` and re-centring to n pixels.
// Returns false when the point falls in the zero padding.
bool source_coord(int i, int n, double s, double& src) {
    const double scaled = n * s;
    const double offset = (scaled - n) / 2.0;
    const double y = i + 0.5 + offset;
    if (y < 0.0 || y >= scaled) return false;
    src = y / s - 0.5;
    return true;
}

Image map_pixels(const Image& img, double (*fn)(double, double), double arg) {
    Image out(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = clamp01(fn(img[i], arg));
    return out;
}

Image convolve3x3(const Image& img, const std::array<double, 9>& k) {
    const int h = img.height(), w = img.width();
    Image out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = std::clamp(r + dr, 0, h - 1), cc = std::clamp(c + dc, 0, w - 1);
                    acc += k[static_cast<std::size_t>((dr + 1) * 3 + dc + 1)] * img(rr, cc);
                }
            out(r, c) = acc;
        }
    return out;
}

}  // namespace

std::string_view to_string(AugKind kind) noexcept {
    switch (kind) {
        case AugKind::identity: return "identity";
        case AugKind::resize_crop: return "resize_crop";
        case AugKind::hflip: return "hflip";
        case AugKind::vflip: return "vflip";
        case AugKind::autocontrast: return "autocontrast";
        case AugKind::gaussian_blur: return "gaussian_blur";
        case AugKind::contrast: return "contrast";
        case AugKind::brightness: return "brightness";
        case AugKind::sharpness: return "sharpness";
        case AugKind::posterize: return "posterize";
        case AugKind::solarize: return "solarize";
    }
    return "unknown";
}

bool is_geometric(AugKind kind) noexcept {
    return kind == AugKind::resize_crop || kind == AugKind::hflip || kind == AugKind::vflip;
}

void AugmentPolicy::validate() const {
    if (max_ops < 0) throw ConfigError("augment: max_ops must be >= 0");
}

std::vector<AugmentationOp> sample_augmentations(const AugmentPolicy& policy, Rng& rng) {
    policy.validate();
    std::vector<AugKind> pool;
    if (policy.use_weak) pool.insert(pool.end(), kWeakOps.begin(), kWeakOps.end());
    if (policy.use_strong) pool.insert(pool.end(), kStrongOps.begin(), kStrongOps.end());
    std::vector<AugmentationOp> ops;
    if (pool.empty() || policy.max_ops == 0) return ops;

    const int count = uniform_int(rng, 0, policy.max_ops);
    for (int i = 0; i < count; ++i) {
        AugmentationOp op;
        op.kind = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
        switch (op.kind) {
            case AugKind::resize_crop: op.param = uniform_real(rng, 0.8, 1.2); break;
            case AugKind::contrast:
            case AugKind::brightness:
            case AugKind::sharpness: op.param = uniform_real(rng, 0.75, 1.25); break;
            case AugKind::gaussian_blur: op.param = uniform_real(rng, 0.1, 1.0); break;
            case AugKind::posterize: op.param = uniform_int(rng, 4, 8); break;
            case AugKind::solarize: op.param = uniform_real(rng, 1.0, 256.0); break;
            default: break;
        }
        ops.push_back(op);
    }
    return ops;
}

Image hflip(const Image& img) { return flip(img, true); }
Image vflip(const Image& img) { return flip(img, false); }
LabelMask hflip(const LabelMask& m) { return flip(m, true); }
LabelMask vflip(const LabelMask& m) { return flip(m, false); }

Image resize_crop(const Image& img, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("resize_crop: scale must be positive");
    const int h = img.height(), w = img.width();
    Image out(h, w);
    for (int r = 0; r < h; ++r) {
        double sy = 0.0;
        if (!source_coord(r, h, scale, sy)) continue;
        sy = std::clamp(sy, 0.0, h - 1.0);
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - y0;
        for (int c = 0; c < w; ++c) {
            double sx = 0.0;
            if (!source_coord(c, w, scale, sx)) continue;
            sx = std::clamp(sx, 0.0, w - 1.0);
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - x0;
            const double top = img(y0, x0) * (1 - fx) + img(y0, x1) * fx;
            const double bot = img(y1, x0) * (1 - fx) + img(y1, x1) * fx;
            out(r, c) = top * (1 - fy) + bot * fy;
        }
    }
    return out;
}

LabelMask resize_crop(const LabelMask& m, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("resize_crop: scale must be positive");
    const int h = m.height(), w = m.width();
    LabelMask out(h, w);
    for (int r = 0; r < h; ++r) {
        double sy = 0.0;
        if (!source_coord(r, h, scale, sy)) continue;
        const int yi = std::clamp(static_cast<int>(std::lround(sy)), 0, h - 1);
        for (int c = 0; c < w; ++c) {
            double sx = 0.0;
            if (!source_coord(c, w, scale, sx)) continue;
            out(r, c) = m(yi, std::clamp(static_cast<int>(std::lround(sx)), 0, w - 1));
        }
    }
    return out;
}

Image autocontrast(const Image& img) {
    if (img.empty()) return img;
    const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
    const double mn = *lo, mx = *hi;
    if (mx <= mn) return img;
    Image out(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = clamp01((img[i] - mn) / (mx - mn));
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (!(sigma > 0.0)) return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (double& v : k) v /= sum;

    const int h = img.height(), w = img.width();
    Image tmp(h, w), out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[static_cast<std::size_t>(i + radius)] * img(r, std::clamp(c + i, 0, w - 1));
            tmp(r, c) = acc;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[static_cast<std::size_t>(i + radius)] * tmp(std::clamp(r + i, 0, h - 1), c);
            out(r, c) = clamp01(acc);
        }
    return out;
}

Image adjust_contrast(const Image& img, double factor) {
    double mean = 0.0;
    for (double v : img) mean += v;
    mean = img.empty() ? 0.0 : mean / static_cast<double>(img.size());
    Image out(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = clamp01(mean + factor * (img[i] - mean));
    return out;
}

Image adjust_brightness(const Image& img, double factor) {
    return map_pixels(img, [](double p, double f) { return p * f; }, factor);
}

Image adjust_sharpness(const Image& img, double factor) {
    constexpr std::array<double, 9> kSmooth{1 / 13.0, 1 / 13.0, 1 / 13.0, 1 / 13.0, 5 / 13.0,
                                            1 / 13.0, 1 / 13.0, 1 / 13.0, 1 / 13.0};
    const Image smooth = convolve3x3(img, kSmooth);
    Image out(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = clamp01(smooth[i] + factor * (img[i] - smooth[i]));
    return out;
}

Image posterize(const Image& img, int bits) {
    if (bits < 1 || bits > 8) throw std::invalid_argument("posterize: bits must be in [1, 8]");
    const int keep = 0xFF & ~((1 << (8 - bits)) - 1);
    Image out(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const int v = static_cast<int>(std::lround(clamp01(img[i]) * 255.0));
        out[i] = static_cast<double>(v & keep) / 255.0;
    }
    return out;
}

Image solarize(const Image& img, double threshold_8bit) {
    const double t = threshold_8bit / 256.0;
    Image out(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double p = clamp01(img[i]);
        out[i] = p > t ? 1.0 - p : p;
    }
    return out;
}

namespace {

Image apply_intensity(const Image& img, const AugmentationOp& op) {
    switch (op.kind) {
        case AugKind::autocontrast: return autocontrast(img);
        case AugKind::gaussian_blur: return gaussian_blur(img, op.param);
        case AugKind::contrast: return adjust_contrast(img, op.param);
        case AugKind::brightness: return adjust_brightness(img, op.param);
        case AugKind::sharpness: return adjust_sharpness(img, op.param);
        case AugKind::posterize: return posterize(img, static_cast<int>(op.param));
        case AugKind::solarize: return solarize(img, op.param);
        default: return img;
    }
}

}  // namespace

std::pair<Image, LabelMask> apply_augmentations(const Image& img, const LabelMask& mask,
                                                const std::vector<AugmentationOp>& ops) {
    if (img.empty()) throw std::invalid_argument("apply_augmentations: empty image");
    require_same_shape(img, mask, "apply_augmentations");
    Image out = img;
    LabelMask m = mask;
    for (const auto& op : ops) {
        switch (op.kind) {
            case AugKind::identity: break;
            case AugKind::hflip:
                out = hflip(out);
                m = hflip(m);
                break;
            case AugKind::vflip:
                out = vflip(out);
                m = vflip(m);
                break;
            case AugKind::resize_crop:
                out = resize_crop(out, op.param);
                m = resize_crop(m, op.param);
                break;
            default: out = apply_intensity(out, op); break;
        }
    }
    return {std::move(out), std::move(m)};
}

Image apply_augmentations(const Image& img, const std::vector<AugmentationOp>& ops) {
    return apply_augmentations(img, LabelMask(img.height(), img.width()), ops).first;
}

}  // namespace switchlab
