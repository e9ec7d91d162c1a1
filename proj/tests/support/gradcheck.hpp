#pragma once

// Directional central-difference checks of the training objectives. Each
// parameter block gets its own random direction, so every block is covered
// without a full per-coordinate sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "switchlab/objective.hpp"
#include "switchlab/random.hpp"

namespace gradcheck {

using namespace switchlab;

enum class Pathway { pretrain, mss, contrastive, consistency };

inline const char* name(Pathway p) {
    switch (p) {
        case Pathway::pretrain: return "pretrain";
        case Pathway::mss: return "mss";
        case Pathway::contrastive: return "contrastive";
        case Pathway::consistency: return "consistency";
    }
    return "?";
}

inline NetConfig small_net() {
    NetConfig c;
    c.height = c.width = 16;
    c.widths = {4, 8};
    c.embed_dim = 4;
    c.projector_channels = 4;
    c.precision = Precision::float64;
    return c;
}

struct Problem {
    SegNet net{small_net()};
    SegNetParams params;
    MixedBatch batch;
    std::vector<Image> images;
    std::vector<LabelMask> labels;
};

inline Problem make_problem(std::uint64_t seed) {
    Problem pr;
    Rng rng(seed);
    pr.params = pr.net.init_params(seed);
    for (double& v : pr.params.values) v += uniform_real(rng, -0.05, 0.05);
    const int h = 16, w = 16;
    auto image = [&] {
        Image im(h, w);
        for (double& v : im) v = uniform_real(rng, 0.0, 1.0);
        return im;
    };
    auto label = [&] {
        LabelMask m(h, w);
        for (auto& v : m) v = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));
        return m;
    };
    MixedBatch& b = pr.batch;
    b.mask = BinaryMask(h, w);
    for (auto& v : b.mask) v = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));
    for (int i = 0; i < 2; ++i) {
        b.u_x.push_back(image());
        b.x_u.push_back(image());
        b.u_x_r.push_back(image());
        b.x_u_r.push_back(image());
        b.ux_base.push_back(label());
        b.ux_patch.push_back(label());
        b.xu_base.push_back(label());
        b.xu_patch.push_back(label());
        pr.images.push_back(image());
        pr.labels.push_back(label());
    }
    return pr;
}

// Each pathway alone with unit weight.
inline LossSpec spec_for(Pathway p) {
    LossSpec s;
    s.mss = p == Pathway::mss;
    s.contrastive = p == Pathway::contrastive;
    s.consistency = p == Pathway::consistency;
    s.weights.lambda_cont = 1.0;
    s.weights.lambda_consist = 1.0;
    return s;
}

// Objective value with queries at `q` and contrastive keys at `k`.
inline double objective(const Problem& pr, Pathway p, const SegNetParams& q, const SegNetParams& k) {
    if (p == Pathway::pretrain) return supervised_objective(pr.net, q, pr.images, pr.labels, 1e-5);
    return switch_objective(pr.net, q, k, pr.batch, spec_for(p)).total;
}

inline std::vector<double> analytic(const Problem& pr, Pathway p) {
    std::vector<double> g(pr.net.param_count(), 0.0);
    if (p == Pathway::pretrain)
        supervised_objective(pr.net, pr.params, pr.images, pr.labels, 1e-5, g);
    else
        switch_objective(pr.net, pr.params, pr.batch, spec_for(p), g);
    return g;
}

// ReLU on/off states and max-pool winners over every forward pass the
// objectives make. Inside one pattern the objectives are smooth, so a
// central difference is only trusted when both ends share the pattern of
// the base point.
inline std::vector<std::uint32_t> activation_pattern(const Problem& pr, Pathway p, const SegNetParams& params) {
    std::vector<std::uint32_t> sig;
    auto signs = [&](const std::vector<FeatureMap>& maps) {
        for (const FeatureMap& m : maps)
            for (double v : m.values()) sig.push_back(v > 0.0);
    };
    auto indices = [&](const std::vector<std::uint32_t>& idx) { sig.insert(sig.end(), idx.begin(), idx.end()); };
    auto visit = [&](const std::vector<Image>& images) {
        const NetTrace t = pr.net.forward_trace(params, stack_images(images));
        signs(t.enc_a1);
        signs(t.enc_a2);
        signs(t.dec_a1);
        signs(t.dec_a2);
        for (const auto& idx : t.pool_idx) indices(idx);
        if (p != Pathway::contrastive) return;
        const ProjectorTrace pt = pr.net.project_trace(params, pr.net.projector_input(t.out));
        signs({pt.a1, pt.a2});
        indices(pt.idx1);
        indices(pt.idx2);
    };
    if (p == Pathway::pretrain) {
        visit(pr.images);
    } else {
        for (const auto* batch : {&pr.batch.u_x, &pr.batch.x_u, &pr.batch.u_x_r, &pr.batch.x_u_r}) visit(*batch);
    }
    return sig;
}

inline SegNetParams shifted(const SegNetParams& p, const std::vector<double>& dir, double h) {
    SegNetParams out = p;
    for (std::size_t i = 0; i < dir.size(); ++i) out.values[i] += h * dir[i];
    return out;
}

// Largest step in h0, h0/4, h0/16, ... whose endpoints keep the base
// pattern; the last candidate when none does.
inline double kink_free_step(const Problem& pr, Pathway p, const std::vector<double>& dir, double h0) {
    const auto base = activation_pattern(pr, p, pr.params);
    double h = h0;
    for (int i = 0; i < 6; ++i, h /= 4) {
        if (activation_pattern(pr, p, shifted(pr.params, dir, h)) == base &&
            activation_pattern(pr, p, shifted(pr.params, dir, -h)) == base)
            return h;
    }
    return h * 4;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct Result {
    double max_rel_err = 0.0;
    std::string worst_block;
};

// Keys stay at the unperturbed parameters, matching their treatment as
// constants; the other pathways have no separate key branch.
inline Result check(Pathway p, std::uint64_t seed, double h0 = 1e-5) {
    const Problem pr = make_problem(seed);
    const std::vector<double> g = analytic(pr, p);
    Rng rng(seed ^ 0xD1CEULL);
    Result r;
    for (const auto& blk : pr.net.layout()) {
        std::vector<double> dir(g.size(), 0.0);
        for (std::size_t i = 0; i < blk.size; ++i) dir[blk.offset + i] = uniform_real(rng, -1.0, 1.0);
        const double h = kink_free_step(pr, p, dir, h0);
        const SegNetParams up = shifted(pr.params, dir, h), down = shifted(pr.params, dir, -h);
        const SegNetParams& kup = p == Pathway::contrastive ? pr.params : up;
        const SegNetParams& kdown = p == Pathway::contrastive ? pr.params : down;
        const double fd = (objective(pr, p, up, kup) - objective(pr, p, down, kdown)) / (2 * h);
        double an = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) an += g[i] * dir[i];
        const double e = rel_err(an, fd);
        if (e > r.max_rel_err) {
            r.max_rel_err = e;
            r.worst_block = blk.name;
        }
    }
    return r;
}

struct Detachment {
    double analytic = 0.0;      // g . d
    double frozen_keys = 0.0;   // FD with keys held at theta
    double keys_only = 0.0;     // FD moving only the keys
    double full = 0.0;          // FD moving queries and keys together
};

// Contrastive pathway, one random direction over all parameters.
inline Detachment detachment(std::uint64_t seed, double h0 = 1e-5) {
    const Problem pr = make_problem(seed);
    const std::vector<double> g = analytic(pr, Pathway::contrastive);
    Rng rng(seed ^ 0xBEEFULL);
    std::vector<double> dir(g.size());
    for (double& v : dir) v = uniform_real(rng, -1.0, 1.0);
    const double h = kink_free_step(pr, Pathway::contrastive, dir, h0);
    const SegNetParams up = shifted(pr.params, dir, h), down = shifted(pr.params, dir, -h);
    const auto f = [&](const SegNetParams& q, const SegNetParams& k) {
        return objective(pr, Pathway::contrastive, q, k);
    };
    Detachment d;
    for (std::size_t i = 0; i < g.size(); ++i) d.analytic += g[i] * dir[i];
    d.frozen_keys = (f(up, pr.params) - f(down, pr.params)) / (2 * h);
    d.keys_only = (f(pr.params, up) - f(pr.params, down)) / (2 * h);
    d.full = (f(up, up) - f(down, down)) / (2 * h);
    return d;
}

}  // namespace gradcheck
