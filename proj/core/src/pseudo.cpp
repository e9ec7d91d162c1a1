#include "switchlab/pseudo.hpp"

#include <numeric>
#include <vector>

namespace switchlab {

namespace {

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }

    std::uint32_t find(std::uint32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // The smaller index stays the root, so a root is its component's first pixel.
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::uint32_t> parent_;
};

struct Labeling {
    std::vector<std::uint32_t> root;  // per pixel; meaningful only for foreground
    std::vector<std::uint32_t> size;  // per root index
};

Labeling label_components(const LabelMask& mask) {
    const int h = mask.height(), w = mask.width();
    DisjointSet ds(mask.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!mask(r, c)) continue;
            const auto i = static_cast<std::uint32_t>(r * w + c);
            if (c > 0 && mask(r, c - 1)) ds.unite(i, i - 1);
            if (r > 0 && mask(r - 1, c)) ds.unite(i, i - static_cast<std::uint32_t>(w));
        }
    Labeling lab{std::vector<std::uint32_t>(mask.size(), 0), std::vector<std::uint32_t>(mask.size(), 0)};
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        lab.root[i] = ds.find(static_cast<std::uint32_t>(i));
        ++lab.size[lab.root[i]];
    }
    return lab;
}

}  // namespace

LabelMask largest_connected_component(const LabelMask& mask) {
    LabelMask out(mask.height(), mask.width());
    const Labeling lab = label_components(mask);
    std::size_t best_root = 0;
    std::uint32_t best_size = 0;
    for (std::size_t i = 0; i < lab.size.size(); ++i)
        if (lab.size[i] > best_size) {  // strict: earliest root wins ties
            best_size = lab.size[i];
            best_root = i;
        }
    if (best_size == 0) return out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] && lab.root[i] == best_root) out[i] = 1;
    return out;
}

int count_components(const LabelMask& mask) {
    const Labeling lab = label_components(mask);
    int n = 0;
    for (auto s : lab.size) n += s > 0 ? 1 : 0;
    return n;
}

PseudoLabel pseudo_label_from_logits(const Logits& logits, int n) {
    if (logits.channels() != 2) throw std::invalid_argument("pseudo label: teacher must emit 2-channel logits");
    const ProbMap probs = softmax_channels(logits);
    PseudoLabel pl{largest_connected_component(argmax_channels(probs, n))};
    const double* fg = probs.plane_ptr(n, 1);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < pl.mask.size(); ++i)
        if (pl.mask[i]) {
            sum += fg[i];
            ++count;
        }
    pl.source_confidence = count ? sum / static_cast<double>(count) : 0.0;
    return pl;
}

PseudoLabel predict_pseudo_label(const TeacherForward& teacher_forward, const Image& img) {
    const Logits logits = teacher_forward(img);
    if (logits.batch() < 1 || logits.height() != img.height() || logits.width() != img.width())
        throw std::invalid_argument("predict_pseudo_label: teacher output shape does not match the image");
    return pseudo_label_from_logits(logits, 0);
}

}  // namespace switchlab
