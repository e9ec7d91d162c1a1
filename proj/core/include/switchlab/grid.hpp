#pragma once

// Raster and tensor types shared by every stage of the pipeline, plus the
// per-pixel channel operations (softmax, argmax, masked composition).

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace switchlab {

struct ImageTag {};
struct LabelTag {};
struct MaskTag {};
struct FieldTag {};

/// Single-channel row-major raster. The tag keeps images, label masks,
/// switch masks and generic scalar fields from being mixed up.
template <typename T, typename Tag>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(int height, int width, T fill = T{})
        : height_(check_dim(height)), width_(check_dim(width)),
          data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}
    Grid(int height, int width, std::vector<T> data)
        : height_(check_dim(height)), width_(check_dim(width)), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
            throw std::invalid_argument("grid data length does not match height*width");
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int r, int c) { return data_[index(r, c)]; }
    const T& operator()(int r, int c) const { return data_[index(r, c)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    const std::vector<T>& vec() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    static int check_dim(int d) {
        if (d < 0) throw std::invalid_argument("grid dimension must be non-negative");
        return d;
    }
    std::size_t index(int r, int c) const noexcept {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

using Image = Grid<double, ImageTag>;
using LabelMask = Grid<std::uint8_t, LabelTag>;   // class ids in {0,1}
using BinaryMask = Grid<std::uint8_t, MaskTag>;   // 0 = false, 1 = true
using Field = Grid<double, FieldTag>;             // probability maps, amplitudes, weights

template <typename A, typename B>
bool same_shape(const A& a, const B& b) noexcept {
    return a.height() == b.height() && a.width() == b.width();
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
    if (!same_shape(a, b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) + "x" +
                                    std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                                    std::to_string(b.width()) + ")");
}

struct LogitsTag {};
struct ProbTag {};
struct FeatureTag {};
struct EmbeddingTag {};

/// Batched NCHW tensor of doubles.
template <typename Tag>
class Tensor4 {
public:
    Tensor4() = default;
    Tensor4(int n, int c, int h, int w, double fill = 0.0)
        : n_(n), c_(c), h_(h), w_(w),
          data_(static_cast<std::size_t>(n) * c * h * w, fill) {
        if (n < 0 || c < 0 || h < 0 || w < 0) throw std::invalid_argument("tensor dimensions must be non-negative");
    }

    int batch() const noexcept { return n_; }
    int channels() const noexcept { return c_; }
    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(h_) * w_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(int n, int c, int y, int x) { return data_[offset(n, c) + static_cast<std::size_t>(y) * w_ + x]; }
    double operator()(int n, int c, int y, int x) const { return data_[offset(n, c) + static_cast<std::size_t>(y) * w_ + x]; }

    std::size_t offset(int n, int c) const noexcept {
        return (static_cast<std::size_t>(n) * c_ + static_cast<std::size_t>(c)) * plane();
    }
    double* plane_ptr(int n, int c) noexcept { return data_.data() + offset(n, c); }
    const double* plane_ptr(int n, int c) const noexcept { return data_.data() + offset(n, c); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    bool same_dims(const Tensor4& o) const noexcept {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    friend bool operator==(const Tensor4&, const Tensor4&) = default;

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double> data_;
};

using Logits = Tensor4<LogitsTag>;
using ProbMap = Tensor4<ProbTag>;
using FeatureMap = Tensor4<FeatureTag>;
/// (batch, dim, K) with the K spatial positions laid out as an h*w plane.
using Embedding = Tensor4<EmbeddingTag>;

// ---------------------------------------------------------------------------

/// Per-pixel softmax over channels, computed with max subtraction.
/// Throws std::domain_error on non-finite input.
ProbMap softmax_channels(const Logits& logits);

/// Per-pixel argmax over channels of sample `n`; ties go to the lower class.
LabelMask argmax_channels(const ProbMap& probs, int n = 0);
LabelMask argmax_channels(const Logits& logits, int n = 0);

/// Channel-1 (foreground) plane of sample `n` as a field.
Field foreground_plane(const ProbMap& probs, int n = 0);

/// `a` where the mask is true, `b` elsewhere.
template <typename G>
G compose_masked(const G& a, const G& b, const BinaryMask& m) {
    require_same_shape(a, b, "compose_masked");
    require_same_shape(a, m, "compose_masked");
    G out = b;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (m[i]) out[i] = a[i];
    return out;
}

BinaryMask complement(const BinaryMask& m);
std::size_t count_true(const BinaryMask& m);
std::size_t count_foreground(const LabelMask& m);

/// Stacks a list of same-shaped images into an (n,1,h,w) tensor.
FeatureMap stack_images(std::span<const Image> images);

Image to_image(const Field& f);
Field to_field(const Image& img);

}  // namespace switchlab
