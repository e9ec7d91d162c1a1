#include "switchlab/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "switchlab/error.hpp"
#include "switchlab/random.hpp"

namespace switchlab {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr char kMagic[4] = {'S', 'W', 'C', 'H'};
constexpr std::uint32_t kVersion = 1;
constexpr double kNormFloor = 1e-12;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

template <typename T>
using TMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Input rows [y0, y1) of a kxk same-padded convolution laid out as columns:
// col is (cin*k*k) x ((y1-y0)*w).
template <typename T>
void im2col(const double* x, int cin, int k, int h, int w, int y0, int y1, T* col) {
    const std::ptrdiff_t hw = static_cast<std::ptrdiff_t>(h) * w;
    const std::ptrdiff_t bw = static_cast<std::ptrdiff_t>(y1 - y0) * w;
    const int r = k / 2;
    for (int ci = 0; ci < cin; ++ci) {
        const double* xp = x + ci * hw;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* row = col + ((ci * k + ky) * k + kx) * bw;
                // Tile position j reads plane index j + shift; copy the
                // in-plane run in one pass, then clear the wrapped columns.
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(y0 + ky - r) * w + (kx - r);
                const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-shift, 0, bw);
                const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(hw - shift, lo, bw);
                std::fill(row, row + lo, T(0));
                const double* src = xp + shift;
                for (std::ptrdiff_t j = lo; j < hi; ++j) row[j] = static_cast<T>(src[j]);
                std::fill(row + hi, row + bw, T(0));
                if (kx < r)
                    for (std::ptrdiff_t j = 0; j < bw; j += w) std::fill(row + j, row + j + (r - kx), T(0));
                else if (kx > r)
                    for (std::ptrdiff_t j = w - (kx - r); j < bw; j += w) std::fill(row + j, row + j + (kx - r), T(0));
            }
    }
}

// Rows per im2col tile, sized so a tile stays cache resident.
int tile_rows(int w) { return std::max(1, 512 / std::max(w, 1)); }

// GEMMs run in T; activations and gradients stay in double.
template <typename T, typename In, typename Out>
void conv_forward_t(const double* params, std::size_t w_off, std::size_t b_off, int cin, int cout, int k, bool relu,
                    const In& in, Out& out) {
    const int n = in.batch(), h = in.height(), w = in.width();
    out = Out(n, cout, h, w);
    const Eigen::Index kk = static_cast<Eigen::Index>(cin) * k * k;
    const TMat<T> wm = Eigen::Map<const RowMat>(params + w_off, cout, kk).template cast<T>();
    const double* bias = params + b_off;
    const int tr = tile_rows(w);
    TMat<T> col(kk, static_cast<Eigen::Index>(tr) * w), y(cout, col.cols());
    for (int s = 0; s < n; ++s)
        for (int y0 = 0; y0 < h; y0 += tr) {
            const int y1 = std::min(h, y0 + tr);
            const Eigen::Index bw = static_cast<Eigen::Index>(y1 - y0) * w;
            im2col(in.plane_ptr(s, 0), cin, k, h, w, y0, y1, col.data());
            Eigen::Map<TMat<T>> yt(y.data(), cout, bw);
            yt.noalias() = wm * Eigen::Map<const TMat<T>>(col.data(), kk, bw);
            for (int c = 0; c < cout; ++c) {
                double* dst = out.plane_ptr(s, c) + static_cast<std::size_t>(y0) * w;
                for (Eigen::Index i = 0; i < bw; ++i) {
                    const double v = static_cast<double>(yt(c, i)) + bias[c];
                    dst[i] = relu ? std::max(v, 0.0) : v;
                }
            }
        }
}

template <typename In, typename Out>
void conv_forward(Precision prec, const double* params, std::size_t w_off, std::size_t b_off, int cin, int cout, int k,
                  bool relu, const In& in, Out& out) {
    if (prec == Precision::float32)
        conv_forward_t<float>(params, w_off, b_off, cin, cout, k, relu, in, out);
    else
        conv_forward_t<double>(params, w_off, b_off, cin, cout, k, relu, in, out);
}

// `dout` is consumed (ReLU mask applied in place). `din` may be null.
template <typename T, typename In, typename Out, typename DIn>
void conv_backward_t(const double* params, std::size_t w_off, std::size_t b_off, int cin, int cout, int k, bool relu,
                     const In& in, const Out& out, Out& dout, DIn* din, std::span<double> grad) {
    const int n = in.batch(), h = in.height(), w = in.width();
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const Eigen::Index kk = static_cast<Eigen::Index>(cin) * k * k;
    const TMat<T> wm = Eigen::Map<const RowMat>(params + w_off, cout, kk).template cast<T>();
    TMat<T> gw = TMat<T>::Zero(cout, kk);
    double* gb = grad.data() + b_off;
    if (relu)
        for (std::size_t i = 0; i < dout.size(); ++i)
            if (out.data()[i] <= 0.0) dout.data()[i] = 0.0;
    const int tr = tile_rows(w);
    TMat<T> col(kk, static_cast<Eigen::Index>(tr) * w), g(cout, col.cols());
    // The input gradient is a convolution of dout with the spatially flipped,
    // channel-transposed kernel.
    const Eigen::Index kt = static_cast<Eigen::Index>(cout) * k * k;
    TMat<T> wt(din ? cin : 0, din ? kt : 0), dcol(din ? kt : 0, din ? col.cols() : 0), dx(cin, col.cols());
    if (din)
        for (int co = 0; co < cout; ++co)
            for (int ci = 0; ci < cin; ++ci)
                for (int t = 0; t < k * k; ++t) wt(ci, co * k * k + (k * k - 1 - t)) = wm(co, ci * k * k + t);
    for (int s = 0; s < n; ++s) {
        for (int c = 0; c < cout; ++c) {
            const double* gp = dout.plane_ptr(s, c);
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += gp[i];
            gb[c] += acc;
        }
        for (int y0 = 0; y0 < h; y0 += tr) {
            const int y1 = std::min(h, y0 + tr);
            const Eigen::Index bw = static_cast<Eigen::Index>(y1 - y0) * w;
            Eigen::Map<TMat<T>> gt(g.data(), cout, bw);
            for (int c = 0; c < cout; ++c) {
                const double* src = dout.plane_ptr(s, c) + static_cast<std::size_t>(y0) * w;
                for (Eigen::Index i = 0; i < bw; ++i) gt(c, i) = static_cast<T>(src[i]);
            }
            im2col(in.plane_ptr(s, 0), cin, k, h, w, y0, y1, col.data());
            gw.noalias() += gt * Eigen::Map<const TMat<T>>(col.data(), kk, bw).transpose();
            if (din) {
                im2col(dout.plane_ptr(s, 0), cout, k, h, w, y0, y1, dcol.data());
                Eigen::Map<TMat<T>> dxt(dx.data(), cin, bw);
                dxt.noalias() = wt * Eigen::Map<const TMat<T>>(dcol.data(), kt, bw);
                for (int c = 0; c < cin; ++c) {
                    double* dst = din->plane_ptr(s, c) + static_cast<std::size_t>(y0) * w;
                    for (Eigen::Index i = 0; i < bw; ++i) dst[i] += static_cast<double>(dxt(c, i));
                }
            }
        }
    }
    Eigen::Map<RowMat>(grad.data() + w_off, cout, kk) += gw.template cast<double>();
}

template <typename In, typename Out, typename DIn>
void conv_backward(Precision prec, const double* params, std::size_t w_off, std::size_t b_off, int cin, int cout,
                   int k, bool relu, const In& in, const Out& out, Out& dout, DIn* din, std::span<double> grad) {
    if (prec == Precision::float32)
        conv_backward_t<float>(params, w_off, b_off, cin, cout, k, relu, in, out, dout, din, grad);
    else
        conv_backward_t<double>(params, w_off, b_off, cin, cout, k, relu, in, out, dout, din, grad);
}

// 2x2 max pooling; idx holds the in-plane source index of each output.
FeatureMap maxpool2(const FeatureMap& in, std::vector<std::uint32_t>& idx) {
    const int n = in.batch(), c = in.channels(), h = in.height() / 2, w = in.width() / 2;
    FeatureMap out(n, c, h, w);
    idx.assign(out.size(), 0);
    std::size_t o = 0;
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch) {
            const double* src = in.plane_ptr(s, ch);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x, ++o) {
                    std::uint32_t best = static_cast<std::uint32_t>(2 * y * in.width() + 2 * x);
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const auto j = static_cast<std::uint32_t>((2 * y + dy) * in.width() + 2 * x + dx);
                            if (src[j] > src[best]) best = j;
                        }
                    idx[o] = best;
                    out.data()[o] = src[best];
                }
        }
    return out;
}

void maxpool2_backward(const FeatureMap& dout, const std::vector<std::uint32_t>& idx, FeatureMap& din) {
    const std::size_t oplane = dout.plane();
    for (int s = 0; s < dout.batch(); ++s)
        for (int ch = 0; ch < dout.channels(); ++ch) {
            double* dst = din.plane_ptr(s, ch);
            const std::size_t base = dout.offset(s, ch);
            for (std::size_t i = 0; i < oplane; ++i) dst[idx[base + i]] += dout.data()[base + i];
        }
}

// Nearest 2x upsampling of `a` concatenated with `skip` along channels.
FeatureMap upsample_concat(const FeatureMap& a, const FeatureMap& skip) {
    const int n = a.batch(), ca = a.channels(), cs = skip.channels(), h = skip.height(), w = skip.width();
    FeatureMap out(n, ca + cs, h, w);
    for (int s = 0; s < n; ++s) {
        for (int c = 0; c < ca; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out(s, c, y, x) = a(s, c, y / 2, x / 2);
        for (int c = 0; c < cs; ++c) std::copy_n(skip.plane_ptr(s, c), skip.plane(), out.plane_ptr(s, ca + c));
    }
    return out;
}

void upsample_concat_backward(const FeatureMap& dcat, FeatureMap& da, FeatureMap& dskip) {
    const int ca = da.channels(), cs = dskip.channels(), h = dskip.height(), w = dskip.width();
    for (int s = 0; s < dcat.batch(); ++s) {
        for (int c = 0; c < ca; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) da(s, c, y / 2, x / 2) += dcat(s, c, y, x);
        for (int c = 0; c < cs; ++c) {
            const double* src = dcat.plane_ptr(s, ca + c);
            double* dst = dskip.plane_ptr(s, c);
            for (std::size_t i = 0; i < dskip.plane(); ++i) dst[i] += src[i];
        }
    }
}

template <typename T>
void add_into(T& dst, const T& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

}  // namespace

void NetConfig::validate() const {
    if (widths.empty()) throw ConfigError("network: at least one stage required");
    for (int c : widths)
        if (c < 1) throw ConfigError("network: channel widths must be >= 1");
    if (embed_dim < 1 || projector_channels < 1) throw ConfigError("network: embedding dims must be >= 1");
    if (classes != 2) throw ConfigError("network: only two classes are supported");
    const int div = std::max(1 << stages(), 4);
    if (height < div || width < div || height % div != 0 || width % div != 0)
        throw ConfigError("network: input size must be divisible by " + std::to_string(div));
}

SegNet::ConvSpec SegNet::add_conv(const std::string& name, int cin, int cout, int k, bool linear) {
    ConvSpec spec;
    spec.cin = cin;
    spec.cout = cout;
    spec.k = k;
    spec.linear = linear;
    spec.weight = param_count_;
    const std::size_t nw = static_cast<std::size_t>(cout) * cin * k * k;
    layout_.push_back({name + ".weight", param_count_, nw});
    param_count_ += nw;
    spec.bias = param_count_;
    layout_.push_back({name + ".bias", param_count_, static_cast<std::size_t>(cout)});
    param_count_ += static_cast<std::size_t>(cout);
    all_convs_.push_back(spec);
    return spec;
}

SegNet::SegNet(NetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int S = cfg_.stages();
    for (int s = 0; s < S; ++s) {
        const int cin = s == 0 ? 1 : cfg_.widths[static_cast<std::size_t>(s - 1)];
        const int c = cfg_.widths[static_cast<std::size_t>(s)];
        enc1_.push_back(add_conv("enc" + std::to_string(s) + ".conv1", cin, c, 3));
        enc2_.push_back(add_conv("enc" + std::to_string(s) + ".conv2", c, c, 3));
    }
    dec1_.resize(static_cast<std::size_t>(std::max(S - 1, 0)));
    dec2_.resize(dec1_.size());
    for (int s = S - 2; s >= 0; --s) {
        const int c = cfg_.widths[static_cast<std::size_t>(s)];
        const int cin = cfg_.widths[static_cast<std::size_t>(s + 1)] + c;
        dec1_[static_cast<std::size_t>(s)] = add_conv("dec" + std::to_string(s) + ".conv1", cin, c, 3);
        dec2_[static_cast<std::size_t>(s)] = add_conv("dec" + std::to_string(s) + ".conv2", c, c, 3);
    }
    head_ = add_conv("head", cfg_.widths[0], cfg_.classes, 1, true);
    const int pin = cfg_.projector_source == ProjectorSource::logits ? cfg_.classes : cfg_.widths[0];
    proj1_ = add_conv("proj.conv1", pin, cfg_.projector_channels, 3);
    proj2_ = add_conv("proj.conv2", cfg_.projector_channels, cfg_.projector_channels, 3);
    proj_out_ = add_conv("proj.out", cfg_.projector_channels, cfg_.embed_dim, 1, true);

    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& b : layout_) {
        h = fnv1a(h, b.name.data(), b.name.size());
        const std::uint64_t sz = b.size;
        h = fnv1a(h, &sz, sizeof sz);
    }
    layout_hash_ = h;
}

const ParamBlock& SegNet::block(const std::string& name) const {
    for (const auto& b : layout_)
        if (b.name == name) return b;
    throw std::out_of_range("no parameter block named " + name);
}

SegNetParams SegNet::zero_params() const { return {std::vector<double>(param_count_, 0.0), layout_hash_}; }

SegNetParams SegNet::init_params(std::uint64_t seed) const {
    SegNetParams p = zero_params();
    Rng rng(seed);
    for (const auto& c : all_convs_) {
        const double fan_in = static_cast<double>(c.cin) * c.k * c.k;
        std::normal_distribution<double> dist(0.0, std::sqrt((c.linear ? 1.0 : 2.0) / fan_in));
        const std::size_t nw = static_cast<std::size_t>(c.cout) * c.cin * c.k * c.k;
        for (std::size_t i = 0; i < nw; ++i) p.values[c.weight + i] = dist(rng);
    }
    return p;
}

void SegNet::check(const SegNetParams& p) const {
    if (p.values.size() != param_count_ || p.layout_hash != layout_hash_)
        throw std::invalid_argument("parameter vector does not match network layout");
}

ForwardOutput SegNet::forward(const SegNetParams& p, const Image& img) const {
    const Image one[] = {img};
    return forward(p, stack_images(one));
}

ForwardOutput SegNet::forward(const SegNetParams& p, const FeatureMap& batch) const {
    return forward_trace(p, batch).out;
}

NetTrace SegNet::forward_trace(const SegNetParams& p, const FeatureMap& batch) const {
    check(p);
    if (batch.channels() != 1 || batch.height() != cfg_.height || batch.width() != cfg_.width)
        throw std::invalid_argument("forward: input must be (n, 1, " + std::to_string(cfg_.height) + ", " +
                                    std::to_string(cfg_.width) + ")");
    const double* P = p.values.data();
    const int S = cfg_.stages();
    NetTrace t;
    t.input = batch;
    t.enc_a1.resize(static_cast<std::size_t>(S));
    t.enc_a2.resize(static_cast<std::size_t>(S));
    t.pooled.resize(static_cast<std::size_t>(S - 1));
    t.pool_idx.resize(static_cast<std::size_t>(S - 1));
    const FeatureMap* x = &t.input;
    for (int s = 0; s < S; ++s) {
        const auto u = static_cast<std::size_t>(s);
        const auto& c1 = enc1_[u];
        const auto& c2 = enc2_[u];
        conv_forward(cfg_.precision, P, c1.weight, c1.bias, c1.cin, c1.cout, 3, true, *x, t.enc_a1[u]);
        conv_forward(cfg_.precision, P, c2.weight, c2.bias, c2.cin, c2.cout, 3, true, t.enc_a1[u], t.enc_a2[u]);
        if (s < S - 1) {
            t.pooled[u] = maxpool2(t.enc_a2[u], t.pool_idx[u]);
            x = &t.pooled[u];
        }
    }
    t.dec_cat.resize(static_cast<std::size_t>(S - 1));
    t.dec_a1.resize(static_cast<std::size_t>(S - 1));
    t.dec_a2.resize(static_cast<std::size_t>(S - 1));
    const FeatureMap* deep = &t.enc_a2[static_cast<std::size_t>(S - 1)];
    for (int s = S - 2; s >= 0; --s) {
        const auto u = static_cast<std::size_t>(s);
        t.dec_cat[u] = upsample_concat(*deep, t.enc_a2[u]);
        conv_forward(cfg_.precision, P, dec1_[u].weight, dec1_[u].bias, dec1_[u].cin, dec1_[u].cout, 3, true, t.dec_cat[u], t.dec_a1[u]);
        conv_forward(cfg_.precision, P, dec2_[u].weight, dec2_[u].bias, dec2_[u].cin, dec2_[u].cout, 3, true, t.dec_a1[u], t.dec_a2[u]);
        deep = &t.dec_a2[u];
    }
    t.out.decoder_features = *deep;
    conv_forward(cfg_.precision, P, head_.weight, head_.bias, head_.cin, head_.cout, 1, false, t.out.decoder_features, t.out.logits);
    for (double v : t.out.logits.values())
        if (!std::isfinite(v)) throw std::domain_error("forward: non-finite logits");
    return t;
}

void SegNet::backward(const SegNetParams& p, const NetTrace& t, const Logits& dlogits, const FeatureMap* dfeatures,
                      std::span<double> grad) const {
    check(p);
    if (grad.size() != param_count_) throw std::invalid_argument("backward: gradient size mismatch");
    if (!dlogits.same_dims(t.out.logits)) throw std::invalid_argument("backward: logits gradient shape mismatch");
    const double* P = p.values.data();
    const int S = cfg_.stages();

    Logits dl = dlogits;
    const FeatureMap& feats = t.out.decoder_features;
    FeatureMap dfeat(feats.batch(), feats.channels(), feats.height(), feats.width());
    conv_backward(cfg_.precision, P, head_.weight, head_.bias, head_.cin, head_.cout, 1, false, feats, t.out.logits, dl, &dfeat, grad);
    if (dfeatures) {
        if (!dfeatures->same_dims(feats)) throw std::invalid_argument("backward: feature gradient shape mismatch");
        add_into(dfeat, *dfeatures);
    }

    // Gradients w.r.t. each encoder output (skip), filled as the decoder unwinds.
    std::vector<FeatureMap> denc(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        const auto& e = t.enc_a2[static_cast<std::size_t>(s)];
        denc[static_cast<std::size_t>(s)] = FeatureMap(e.batch(), e.channels(), e.height(), e.width());
    }

    FeatureMap dcur = std::move(dfeat);  // gradient w.r.t. the current decoder output
    for (int s = 0; s <= S - 2; ++s) {
        const auto u = static_cast<std::size_t>(s);
        FeatureMap da1(t.dec_a1[u].batch(), t.dec_a1[u].channels(), t.dec_a1[u].height(), t.dec_a1[u].width());
        conv_backward(cfg_.precision, P, dec2_[u].weight, dec2_[u].bias, dec2_[u].cin, dec2_[u].cout, 3, true, t.dec_a1[u],
                      t.dec_a2[u], dcur, &da1, grad);
        FeatureMap dcat(t.dec_cat[u].batch(), t.dec_cat[u].channels(), t.dec_cat[u].height(), t.dec_cat[u].width());
        conv_backward(cfg_.precision, P, dec1_[u].weight, dec1_[u].bias, dec1_[u].cin, dec1_[u].cout, 3, true, t.dec_cat[u],
                      t.dec_a1[u], da1, &dcat, grad);
        // The deeper input is the next decoder level's output, or the bottleneck.
        const FeatureMap& deep = s + 1 <= S - 2 ? t.dec_a2[u + 1] : t.enc_a2[static_cast<std::size_t>(S - 1)];
        FeatureMap ddeep(deep.batch(), deep.channels(), deep.height(), deep.width());
        upsample_concat_backward(dcat, ddeep, denc[u]);
        dcur = std::move(ddeep);
    }
    add_into(denc[static_cast<std::size_t>(S - 1)], dcur);

    for (int s = S - 1; s >= 0; --s) {
        const auto u = static_cast<std::size_t>(s);
        FeatureMap da1(t.enc_a1[u].batch(), t.enc_a1[u].channels(), t.enc_a1[u].height(), t.enc_a1[u].width());
        conv_backward(cfg_.precision, P, enc2_[u].weight, enc2_[u].bias, enc2_[u].cin, enc2_[u].cout, 3, true, t.enc_a1[u],
                      t.enc_a2[u], denc[u], &da1, grad);
        if (s == 0) {
            conv_backward<FeatureMap, FeatureMap, FeatureMap>(cfg_.precision, P, enc1_[u].weight, enc1_[u].bias, enc1_[u].cin,
                                                              enc1_[u].cout, 3, true, t.input, t.enc_a1[u], da1,
                                                              nullptr, grad);
        } else {
            const FeatureMap& in = t.pooled[u - 1];
            FeatureMap din(in.batch(), in.channels(), in.height(), in.width());
            conv_backward(cfg_.precision, P, enc1_[u].weight, enc1_[u].bias, enc1_[u].cin, enc1_[u].cout, 3, true, in, t.enc_a1[u],
                          da1, &din, grad);
            maxpool2_backward(din, t.pool_idx[u - 1], denc[u - 1]);
        }
    }
}

FeatureMap SegNet::projector_input(const ForwardOutput& out) const {
    if (cfg_.projector_source == ProjectorSource::decoder_features) return out.decoder_features;
    const Logits& l = out.logits;
    FeatureMap f(l.batch(), l.channels(), l.height(), l.width());
    std::copy(l.values().begin(), l.values().end(), f.values().begin());
    return f;
}

ProjectorTrace SegNet::project_trace(const SegNetParams& p, const FeatureMap& features) const {
    check(p);
    if (features.channels() != proj1_.cin) throw std::invalid_argument("project: channel count mismatch");
    if (features.height() % 4 != 0 || features.width() % 4 != 0 || features.height() == 0 || features.width() == 0)
        throw std::invalid_argument("project: spatial size must be divisible by 4");
    const double* P = p.values.data();
    ProjectorTrace t;
    t.input = features;
    conv_forward(cfg_.precision, P, proj1_.weight, proj1_.bias, proj1_.cin, proj1_.cout, 3, true, t.input, t.a1);
    t.p1 = maxpool2(t.a1, t.idx1);
    conv_forward(cfg_.precision, P, proj2_.weight, proj2_.bias, proj2_.cin, proj2_.cout, 3, true, t.p1, t.a2);
    t.p2 = maxpool2(t.a2, t.idx2);
    conv_forward(cfg_.precision, P, proj_out_.weight, proj_out_.bias, proj_out_.cin, proj_out_.cout, 1, false, t.p2, t.raw);
    t.embedding = t.raw;
    if (cfg_.normalize_embedding) {
        const std::size_t k = t.raw.plane();
        for (int b = 0; b < t.raw.batch(); ++b)
            for (std::size_t i = 0; i < k; ++i) {
                double ss = 0.0;
                for (int d = 0; d < t.raw.channels(); ++d) ss += t.raw.plane_ptr(b, d)[i] * t.raw.plane_ptr(b, d)[i];
                const double inv = 1.0 / std::max(std::sqrt(ss), kNormFloor);
                for (int d = 0; d < t.raw.channels(); ++d) t.embedding.plane_ptr(b, d)[i] *= inv;
            }
    }
    return t;
}

Embedding SegNet::project(const SegNetParams& p, const FeatureMap& features) const {
    return project_trace(p, features).embedding;
}

FeatureMap SegNet::project_backward(const SegNetParams& p, const ProjectorTrace& t, const Embedding& demb,
                                    std::span<double> grad) const {
    check(p);
    if (grad.size() != param_count_) throw std::invalid_argument("project_backward: gradient size mismatch");
    if (!demb.same_dims(t.embedding)) throw std::invalid_argument("project_backward: embedding gradient shape mismatch");
    const double* P = p.values.data();
    Embedding de = demb;
    if (cfg_.normalize_embedding) {
        // d(z/|z|) = (I - e e^T) / |z|
        const std::size_t k = t.raw.plane();
        for (int b = 0; b < t.raw.batch(); ++b)
            for (std::size_t i = 0; i < k; ++i) {
                double ss = 0.0, dot = 0.0;
                for (int d = 0; d < t.raw.channels(); ++d) {
                    ss += t.raw.plane_ptr(b, d)[i] * t.raw.plane_ptr(b, d)[i];
                    dot += t.embedding.plane_ptr(b, d)[i] * demb.plane_ptr(b, d)[i];
                }
                const double inv = 1.0 / std::max(std::sqrt(ss), kNormFloor);
                for (int d = 0; d < t.raw.channels(); ++d)
                    de.plane_ptr(b, d)[i] = (demb.plane_ptr(b, d)[i] - t.embedding.plane_ptr(b, d)[i] * dot) * inv;
            }
    }
    FeatureMap dp2(t.p2.batch(), t.p2.channels(), t.p2.height(), t.p2.width());
    conv_backward(cfg_.precision, P, proj_out_.weight, proj_out_.bias, proj_out_.cin, proj_out_.cout, 1, false, t.p2, t.raw, de,
                  &dp2, grad);
    FeatureMap da2(t.a2.batch(), t.a2.channels(), t.a2.height(), t.a2.width());
    maxpool2_backward(dp2, t.idx2, da2);
    FeatureMap dp1(t.p1.batch(), t.p1.channels(), t.p1.height(), t.p1.width());
    conv_backward(cfg_.precision, P, proj2_.weight, proj2_.bias, proj2_.cin, proj2_.cout, 3, true, t.p1, t.a2, da2, &dp1, grad);
    FeatureMap da1(t.a1.batch(), t.a1.channels(), t.a1.height(), t.a1.width());
    maxpool2_backward(dp1, t.idx1, da1);
    FeatureMap din(t.input.batch(), t.input.channels(), t.input.height(), t.input.width());
    conv_backward(cfg_.precision, P, proj1_.weight, proj1_.bias, proj1_.cin, proj1_.cout, 3, true, t.input, t.a1, da1, &din, grad);
    return din;
}

// ---------------------------------------------------------------------------

double cosine_lr(long step, long total_steps, double lr0) {
    if (total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
    if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step out of range");
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

void Sgd::step(SegNetParams& params, std::span<const double> grads, double lr) {
    if (grads.size() != params.values.size() || velocity_.size() != params.values.size())
        throw std::invalid_argument("sgd: size mismatch");
    for (std::size_t i = 0; i < velocity_.size(); ++i) {
        velocity_[i] = momentum_ * velocity_[i] + grads[i];
        params.values[i] -= lr * velocity_[i];
    }
}

void Sgd::set_velocity(std::vector<double> v) {
    if (v.size() != velocity_.size()) throw std::invalid_argument("sgd: velocity size mismatch");
    velocity_ = std::move(v);
}

SegNetParams sgd_step(const SegNetParams& params, std::span<const double> grads, double lr, double momentum,
                      std::vector<double>& velocity) {
    if (velocity.empty()) velocity.assign(params.values.size(), 0.0);
    Sgd opt(params.values.size(), momentum);
    opt.set_velocity(std::move(velocity));
    SegNetParams out = params;
    opt.step(out, grads, lr);
    velocity = opt.velocity();
    return out;
}

void ema_update(SegNetParams& teacher, const SegNetParams& student, double alpha) {
    if (teacher.layout_hash != student.layout_hash || teacher.values.size() != student.values.size())
        throw std::invalid_argument("ema_update: layout mismatch");
    const double beta = 1.0 - alpha;
    for (std::size_t i = 0; i < teacher.values.size(); ++i)
        teacher.values[i] = alpha * teacher.values[i] + beta * student.values[i];
}

// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& f, const std::filesystem::path& path) {
    T v{};
    if (!f.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("truncated checkpoint: " + path.string());
    return v;
}

std::vector<double> get_doubles(std::ifstream& f, const std::filesystem::path& path) {
    const auto n = get<std::uint64_t>(f, path);
    if (n > (1ULL << 32)) throw DataError("implausible checkpoint length: " + path.string());
    std::vector<double> v(n);
    if (n && !f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
        throw DataError("truncated checkpoint: " + path.string());
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SegNetParams& params, std::span<const double> velocity) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint: " + path.string());
    f.write(kMagic, 4);
    put(f, kVersion);
    put(f, params.layout_hash);
    put(f, static_cast<std::uint64_t>(params.values.size()));
    f.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.values.size() * sizeof(double)));
    put(f, static_cast<std::uint64_t>(velocity.size()));
    f.write(reinterpret_cast<const char*>(velocity.data()), static_cast<std::streamsize>(velocity.size() * sizeof(double)));
    if (!f) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path.string());
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a checkpoint: " + path.string());
    if (get<std::uint32_t>(f, path) != kVersion) throw DataError("unsupported checkpoint version: " + path.string());
    Checkpoint ck;
    ck.params.layout_hash = get<std::uint64_t>(f, path);
    ck.params.values = get_doubles(f, path);
    ck.velocity = get_doubles(f, path);
    for (double v : ck.params.values)
        if (!std::isfinite(v)) throw DataError("non-finite parameter in checkpoint: " + path.string());
    return ck;
}

}  // namespace switchlab
