#include "switchlab/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace switchlab {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(what) + ": non-finite loss");
}

template <typename T>
T zeros_like(const T& t) {
    return T(t.batch(), t.channels(), t.height(), t.width());
}

// Moves a projector-input gradient onto whichever tensor feeds the projector.
void route_projector_grad(const SegNet& net, const FeatureMap& dproj, Logits& dlogits, FeatureMap& dfeat) {
    if (net.config().projector_source == ProjectorSource::logits) {
        for (std::size_t i = 0; i < dproj.size(); ++i) dlogits.data()[i] += dproj.data()[i];
    } else {
        for (std::size_t i = 0; i < dproj.size(); ++i) dfeat.data()[i] += dproj.data()[i];
    }
}

struct Branch {
    NetTrace trace;
    Logits dlogits;
    FeatureMap dfeat;
    bool touched = false;
};

Branch run_branch(const SegNet& net, const SegNetParams& params, std::span<const Image> images) {
    Branch b;
    b.trace = net.forward_trace(params, stack_images(images));
    b.dlogits = zeros_like(b.trace.out.logits);
    b.dfeat = zeros_like(b.trace.out.decoder_features);
    return b;
}

void finish_branch(const SegNet& net, const SegNetParams& params, Branch& b, std::span<double> grad) {
    if (grad.empty() || !b.touched) return;
    net.backward(params, b.trace, b.dlogits, &b.dfeat, grad);
}

}  // namespace

double supervised_objective(const SegNet& net, const SegNetParams& params, std::span<const Image> images,
                            std::span<const LabelMask> labels, double eps, std::span<double> grad) {
    if (images.size() != labels.size() || images.empty())
        throw std::invalid_argument("supervised_objective: need matching non-empty images and labels");
    const bool want = !grad.empty();
    Branch b = run_branch(net, params, images);
    const double loss = pretrain_loss(b.trace.out.logits, labels, eps, want ? &b.dlogits : nullptr, 1.0);
    require_finite(loss, "supervised_objective");
    b.touched = true;
    finish_branch(net, params, b, grad);
    return loss;
}

LossBreakdown switch_objective(const SegNet& net, const SegNetParams& params, const MixedBatch& batch,
                               const LossSpec& spec, std::span<double> grad) {
    return switch_objective(net, params, params, batch, spec, grad);
}

LossBreakdown switch_objective(const SegNet& net, const SegNetParams& params, const SegNetParams& key_params,
                               const MixedBatch& batch, const LossSpec& spec, std::span<double> grad) {
    spec.weights.validate();
    const std::size_t n = batch.u_x.size();
    if (n == 0 || batch.x_u.size() != n) throw std::invalid_argument("switch_objective: mixed batch size mismatch");
    if (!grad.empty() && grad.size() != net.param_count())
        throw std::invalid_argument("switch_objective: gradient size mismatch");
    const bool want = !grad.empty();
    const bool need_r = spec.contrastive || spec.consistency;
    if (need_r && (batch.u_x_r.size() != n || batch.x_u_r.size() != n))
        throw std::invalid_argument("switch_objective: frequency-switched batch missing");
    const LossWeights& w = spec.weights;

    LossBreakdown out;
    Branch ux = run_branch(net, params, batch.u_x);
    Branch xu = run_branch(net, params, batch.x_u);

    if (spec.mss) {
        if (batch.ux_base.size() != n || batch.ux_patch.size() != n || batch.xu_base.size() != n ||
            batch.xu_patch.size() != n)
            throw std::invalid_argument("switch_objective: label count mismatch");
        const auto a = mixed_region_terms(ux.trace.out.logits, batch.ux_base, batch.ux_patch, batch.mask, w,
                                          want ? &ux.dlogits : nullptr, 0.5);
        const auto b = mixed_region_terms(xu.trace.out.logits, batch.xu_base, batch.xu_patch, batch.mask, w,
                                          want ? &xu.dlogits : nullptr, 0.5);
        out.mss = mss_loss(a.dice, a.ce, b.dice, b.ce);
        ux.touched = xu.touched = true;
    }

    if (need_r) {
        Branch ux_r = run_branch(net, params, batch.u_x_r);
        Branch xu_r = run_branch(net, params, batch.x_u_r);

        if (spec.contrastive) {
            const bool same_keys = &key_params == &params;
            const auto keys = [&](const Branch& br, std::span<const Image> images) {
                if (same_keys) return net.project(key_params, net.projector_input(br.trace.out));
                return net.project(key_params, net.projector_input(net.forward(key_params, stack_images(images))));
            };
            const double scale = 0.5 * w.lambda_cont;
            double cont = 0.0;
            for (auto [br, br_r, imgs_r] : {std::tuple{&ux, &ux_r, std::span<const Image>(batch.u_x_r)},
                                            std::tuple{&xu, &xu_r, std::span<const Image>(batch.x_u_r)}}) {
                const Embedding h_r = keys(*br_r, imgs_r);
                const ProjectorTrace pt = net.project_trace(params, net.projector_input(br->trace.out));
                Embedding dh = zeros_like(pt.embedding);
                cont += 0.5 * infonce_contrastive(pt.embedding, h_r, w.tau, w.include_positive_in_denominator,
                                                  want ? &dh : nullptr, scale);
                if (want) {
                    const FeatureMap dproj = net.project_backward(params, pt, dh, grad);
                    route_projector_grad(net, dproj, br->dlogits, br->dfeat);
                }
                br->touched = true;
            }
            out.cont = cont;
        }

        if (spec.consistency) {
            const double scale = 0.5 * w.lambda_consist;
            const double c1 = consistency_mse(ux.trace.out.logits, ux_r.trace.out.logits, want ? &ux.dlogits : nullptr,
                                              want ? &ux_r.dlogits : nullptr, scale);
            const double c2 = consistency_mse(xu.trace.out.logits, xu_r.trace.out.logits, want ? &xu.dlogits : nullptr,
                                              want ? &xu_r.dlogits : nullptr, scale);
            out.consist = 0.5 * (c1 + c2);
            ux.touched = xu.touched = ux_r.touched = xu_r.touched = true;
        }
        finish_branch(net, params, ux_r, grad);
        finish_branch(net, params, xu_r, grad);
    }

    finish_branch(net, params, ux, grad);
    finish_branch(net, params, xu, grad);
    out.total = total_loss(out.mss, out.cont, out.consist, w);
    require_finite(out.total, "switch_objective");
    return out;
}

}  // namespace switchlab
