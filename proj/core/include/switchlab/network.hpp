#pragma once

// Small encoder-decoder segmentation network with skip connections and a
// projection head, trained with analytic gradients.
//
// Encoder stage s: conv3x3-ReLU, conv3x3-ReLU at 1/2^s resolution, 2x2 max
// pooling between stages. Decoder stage s: nearest 2x upsampling of the
// deeper output, channel concatenation with encoder stage s, two
// conv3x3-ReLU. A 1x1 conv on the last decoder map gives the logits.
// Projector: conv3x3-ReLU, maxpool, conv3x3-ReLU, maxpool, 1x1 conv.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "switchlab/grid.hpp"

namespace switchlab {

enum class ProjectorSource {
    decoder_features,  // last decoder feature map (before the 1x1 head)
    logits,
};

// Arithmetic type of the convolution products. Parameters, activations and
// gradients are always stored in double.
enum class Precision {
    float64,
    float32,
};

struct NetConfig {
    int height = 256;
    int width = 256;
    std::vector<int> widths{8, 16, 32};  // channels per encoder stage
    int embed_dim = 16;
    int projector_channels = 16;
    int classes = 2;
    ProjectorSource projector_source = ProjectorSource::decoder_features;
    Precision precision = Precision::float64;
    bool normalize_embedding = true;  // unit-length projector output per position

    int stages() const noexcept { return static_cast<int>(widths.size()); }
    void validate() const;
};

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct SegNetParams {
    std::vector<double> values;
    std::uint64_t layout_hash = 0;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const SegNetParams&, const SegNetParams&) = default;
};

struct ForwardOutput {
    Logits logits;               // (n, 2, H, W)
    FeatureMap decoder_features; // (n, widths[0], H, W)
};

/// Activations kept for the backward pass.
struct NetTrace {
    FeatureMap input;
    std::vector<FeatureMap> enc_a1, enc_a2;           // per encoder stage, post-ReLU
    std::vector<FeatureMap> pooled;                   // per stage < S-1
    std::vector<std::vector<std::uint32_t>> pool_idx;
    std::vector<FeatureMap> dec_cat, dec_a1, dec_a2;  // per decoder level s = 0..S-2
    ForwardOutput out;
};

struct ProjectorTrace {
    FeatureMap input;
    FeatureMap a1, p1, a2, p2;
    std::vector<std::uint32_t> idx1, idx2;
    Embedding raw;        // 1x1 conv output
    Embedding embedding;  // raw, or raw scaled to unit length per position
};

class SegNet {
public:
    explicit SegNet(NetConfig cfg);

    const NetConfig& config() const noexcept { return cfg_; }
    const std::vector<ParamBlock>& layout() const noexcept { return layout_; }
    std::size_t param_count() const noexcept { return param_count_; }
    std::uint64_t layout_hash() const noexcept { return layout_hash_; }
    const ParamBlock& block(const std::string& name) const;

    /// He fan-in initialization for every conv feeding a ReLU, 1/sqrt(fan_in)
    /// for the linear output layers; zero biases.
    SegNetParams init_params(std::uint64_t seed) const;
    SegNetParams zero_params() const;
    void check(const SegNetParams& p) const;

    ForwardOutput forward(const SegNetParams& p, const Image& img) const;
    ForwardOutput forward(const SegNetParams& p, const FeatureMap& batch) const;
    NetTrace forward_trace(const SegNetParams& p, const FeatureMap& batch) const;

    /// Accumulates dLoss/dparams into `grad` given upstream gradients on the
    /// logits and (optionally) the decoder features.
    void backward(const SegNetParams& p, const NetTrace& trace, const Logits& dlogits, const FeatureMap* dfeatures,
                  std::span<double> grad) const;

    /// Input tensor the projector consumes for a forward output.
    FeatureMap projector_input(const ForwardOutput& out) const;

    Embedding project(const SegNetParams& p, const FeatureMap& features) const;
    ProjectorTrace project_trace(const SegNetParams& p, const FeatureMap& features) const;
    /// Accumulates projector parameter gradients into `grad` and returns
    /// dLoss/dfeatures.
    FeatureMap project_backward(const SegNetParams& p, const ProjectorTrace& trace, const Embedding& demb,
                                std::span<double> grad) const;

private:
    struct ConvSpec {
        std::size_t weight = 0, bias = 0;
        int cin = 0, cout = 0, k = 3;
        bool linear = false;  // no ReLU follows
    };

    ConvSpec add_conv(const std::string& name, int cin, int cout, int k, bool linear = false);

    NetConfig cfg_;
    std::vector<ParamBlock> layout_;
    std::size_t param_count_ = 0;
    std::uint64_t layout_hash_ = 0;
    std::vector<ConvSpec> enc1_, enc2_, dec1_, dec2_;  // decoder vectors indexed by level
    ConvSpec head_, proj1_, proj2_, proj_out_;
    std::vector<ConvSpec> all_convs_;
};

// ---------------------------------------------------------------------------
// Optimization

/// lr0 * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(long step, long total_steps, double lr0);

/// SGD with classical momentum: v = mu * v + g; theta -= lr * v.
class Sgd {
public:
    Sgd(std::size_t n, double momentum) : velocity_(n, 0.0), momentum_(momentum) {}

    void step(SegNetParams& params, std::span<const double> grads, double lr);

    const std::vector<double>& velocity() const noexcept { return velocity_; }
    void set_velocity(std::vector<double> v);
    double momentum() const noexcept { return momentum_; }

private:
    std::vector<double> velocity_;
    double momentum_;
};

SegNetParams sgd_step(const SegNetParams& params, std::span<const double> grads, double lr, double momentum,
                      std::vector<double>& velocity);

/// theta_t <- alpha * theta_t + (1 - alpha) * theta_s.
void ema_update(SegNetParams& teacher, const SegNetParams& student, double alpha);

// ---------------------------------------------------------------------------
// Checkpoints: "SWCH" | u32 version | u64 layout hash | u64 n | n x f64 params
//              | u64 m | m x f64 velocity (m = 0 when absent). Little-endian.

struct Checkpoint {
    SegNetParams params;
    std::vector<double> velocity;
};

void save_checkpoint(const std::filesystem::path& path, const SegNetParams& params,
                     std::span<const double> velocity = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace switchlab
