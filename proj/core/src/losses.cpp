#include "switchlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "switchlab/error.hpp"

namespace switchlab {

void LossWeights::validate() const {
    if (w_b < 0 || w_p < 0 || lambda_cont < 0 || lambda_consist < 0 || epsilon < 0)
        throw ConfigError("loss weights must be non-negative");
    if (!(tau > 0)) throw ConfigError("temperature tau must be positive");
}

std::vector<std::uint8_t> flatten_labels(std::span<const LabelMask> labels) {
    std::vector<std::uint8_t> out;
    for (const auto& l : labels) out.insert(out.end(), l.begin(), l.end());
    return out;
}

namespace {

void check_two_class(const Logits& logits, std::size_t n_labels, std::size_t n_weights, const char* what) {
    if (logits.channels() != 2) throw std::invalid_argument(std::string(what) + ": expected 2-channel logits");
    const std::size_t pixels = static_cast<std::size_t>(logits.batch()) * logits.plane();
    if (n_labels != pixels || n_weights != pixels) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

void check_grad(const Logits* grad, const Logits& like, const char* what) {
    if (grad && !grad->same_dims(like)) throw std::invalid_argument(std::string(what) + ": gradient tensor has the wrong shape");
}

// Softmax foreground probability for a 2-class pixel.
inline double fg_prob(double z0, double z1) { return 1.0 / (1.0 + std::exp(z0 - z1)); }

}  // namespace

double dice_loss(std::span<const double> prob_fg, std::span<const std::uint8_t> gt, std::span<const double> weights,
                 double eps, std::span<double> grad_prob, double scale) {
    if (prob_fg.size() != gt.size() || prob_fg.size() != weights.size())
        throw std::invalid_argument("dice_loss: shape mismatch");
    double inter = 0.0, sum_p = 0.0, sum_g = 0.0, sum_w = 0.0;
    for (std::size_t i = 0; i < prob_fg.size(); ++i) {
        const double w = weights[i], g = gt[i] ? 1.0 : 0.0;
        inter += w * prob_fg[i] * g;
        sum_p += w * prob_fg[i];
        sum_g += w * g;
        sum_w += w;
    }
    if (sum_w == 0.0) return 0.0;
    const double num = 2.0 * inter + eps;
    const double den = sum_p + sum_g + eps;
    if (!grad_prob.empty()) {
        if (grad_prob.size() != prob_fg.size()) throw std::invalid_argument("dice_loss: gradient length mismatch");
        const double den2 = den * den;
        for (std::size_t i = 0; i < prob_fg.size(); ++i) {
            const double w = weights[i], g = gt[i] ? 1.0 : 0.0;
            grad_prob[i] += scale * -(2.0 * w * g * den - num * w) / den2;
        }
    }
    return 1.0 - num / den;
}

double dice_loss(const Field& prob_fg, const LabelMask& gt, const Field& weights, double eps) {
    require_same_shape(prob_fg, gt, "dice_loss");
    require_same_shape(prob_fg, weights, "dice_loss");
    return dice_loss(prob_fg.values(), gt.values(), weights.values(), eps);
}

double dice_loss_logits(const Logits& logits, std::span<const std::uint8_t> gt, std::span<const double> weights,
                        double eps, Logits* grad, double scale) {
    check_two_class(logits, gt.size(), weights.size(), "dice_loss");
    check_grad(grad, logits, "dice_loss");
    const std::size_t hw = logits.plane();
    std::vector<double> p(gt.size());
    for (int b = 0; b < logits.batch(); ++b) {
        const double* z0 = logits.plane_ptr(b, 0);
        const double* z1 = logits.plane_ptr(b, 1);
        for (std::size_t i = 0; i < hw; ++i) p[b * hw + i] = fg_prob(z0[i], z1[i]);
    }
    if (!grad) return dice_loss(p, gt, weights, eps);
    std::vector<double> dp(p.size(), 0.0);
    const double loss = dice_loss(p, gt, weights, eps, dp, 1.0);
    for (int b = 0; b < logits.batch(); ++b) {
        double* g0 = grad->plane_ptr(b, 0);
        double* g1 = grad->plane_ptr(b, 1);
        for (std::size_t i = 0; i < hw; ++i) {
            const std::size_t k = b * hw + i;
            const double dz = scale * dp[k] * p[k] * (1.0 - p[k]);
            g1[i] += dz;
            g0[i] -= dz;
        }
    }
    return loss;
}

double cross_entropy_loss(const Logits& logits, std::span<const std::uint8_t> gt, std::span<const double> weights,
                          Logits* grad, double scale) {
    check_two_class(logits, gt.size(), weights.size(), "cross_entropy_loss");
    check_grad(grad, logits, "cross_entropy_loss");
    const std::size_t hw = logits.plane();
    double sum_w = 0.0;
    for (double w : weights) sum_w += w;
    if (sum_w == 0.0) return 0.0;
    double total = 0.0;
    for (int b = 0; b < logits.batch(); ++b) {
        const double* z0 = logits.plane_ptr(b, 0);
        const double* z1 = logits.plane_ptr(b, 1);
        for (std::size_t i = 0; i < hw; ++i) {
            const std::size_t k = b * hw + i;
            const double w = weights[k];
            if (w == 0.0) continue;
            const double mx = std::max(z0[i], z1[i]);
            const double lse = mx + std::log(std::exp(z0[i] - mx) + std::exp(z1[i] - mx));
            const double z_true = gt[k] ? z1[i] : z0[i];
            total += w * (lse - z_true);
            if (grad) {
                const double p1 = fg_prob(z0[i], z1[i]);
                const double coef = scale * w / sum_w;
                const double g1 = p1 - (gt[k] ? 1.0 : 0.0);
                grad->plane_ptr(b, 1)[i] += coef * g1;
                grad->plane_ptr(b, 0)[i] -= coef * g1;
            }
        }
    }
    return total / sum_w;
}

double cross_entropy_loss(const Logits& logits, const LabelMask& gt, const Field& weights) {
    require_same_shape(gt, weights, "cross_entropy_loss");
    if (logits.batch() != 1) throw std::invalid_argument("cross_entropy_loss: single-sample overload needs batch 1");
    return cross_entropy_loss(logits, gt.values(), weights.values());
}

RegionLossTerms mixed_region_terms(const Logits& pred, std::span<const LabelMask> base,
                                   std::span<const LabelMask> patch, const BinaryMask& m, const LossWeights& w,
                                   Logits* grad, double scale) {
    const int n = pred.batch();
    if (static_cast<int>(base.size()) != n || static_cast<int>(patch.size()) != n)
        throw std::invalid_argument("mixed_region_loss: label count does not match the batch");
    if (pred.height() != m.height() || pred.width() != m.width())
        throw std::invalid_argument("mixed_region_loss: mask shape mismatch");
    const std::size_t hw = pred.plane();
    std::vector<double> in_w(n * hw), out_w(n * hw);
    for (int b = 0; b < n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
            in_w[b * hw + i] = m[i] ? 1.0 : 0.0;
            out_w[b * hw + i] = m[i] ? 0.0 : 1.0;
        }
    const auto base_flat = flatten_labels(base);
    const auto patch_flat = flatten_labels(patch);
    // d value / d terms = 1/2 for each of the four weighted pieces.
    const double half = 0.5 * scale;
    RegionLossTerms t;
    t.dice = w.w_b * dice_loss_logits(pred, base_flat, in_w, w.epsilon, grad, half * w.w_b) +
             w.w_p * dice_loss_logits(pred, patch_flat, out_w, w.epsilon, grad, half * w.w_p);
    t.ce = w.w_b * cross_entropy_loss(pred, base_flat, in_w, grad, half * w.w_b) +
           w.w_p * cross_entropy_loss(pred, patch_flat, out_w, grad, half * w.w_p);
    return t;
}

double mixed_region_loss(const Logits& pred, const LabelMask& base_label, const LabelMask& patch_label,
                         const BinaryMask& m, const LossWeights& w) {
    return mixed_region_terms(pred, std::span(&base_label, 1), std::span(&patch_label, 1), m, w).value();
}

double mss_loss(double dice_ux, double ce_ux, double dice_xu, double ce_xu) noexcept {
    return 0.25 * (dice_ux + ce_ux + dice_xu + ce_xu);
}

double infonce_contrastive(const Embedding& h, const Embedding& h_r, double tau, bool include_positive_in_denominator,
                           Embedding* grad, double scale) {
    if (!h.same_dims(h_r)) throw std::invalid_argument("infonce_contrastive: embedding shapes differ");
    if (!(tau > 0)) throw std::invalid_argument("infonce_contrastive: tau must be positive");
    const int batch = h.batch(), dim = h.channels();
    const int k = static_cast<int>(h.plane());
    if (k < 2) throw std::invalid_argument("infonce_contrastive: need at least two positions for negatives");
    if (grad && !grad->same_dims(h)) throw std::invalid_argument("infonce_contrastive: gradient shape mismatch");
    const double n_queries = static_cast<double>(batch) * k;

    std::vector<double> sim(static_cast<std::size_t>(k) * k);
    std::vector<double> soft(static_cast<std::size_t>(k));
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        // sim[i*k + j] = <h^{b,i}, h_r^{b,j}> / tau
        std::fill(sim.begin(), sim.end(), 0.0);
        for (int d = 0; d < dim; ++d) {
            const double* q = h.plane_ptr(b, d);
            const double* key = h_r.plane_ptr(b, d);
            for (int i = 0; i < k; ++i) {
                const double qi = q[i];
                double* row = &sim[static_cast<std::size_t>(i) * k];
                for (int j = 0; j < k; ++j) row[j] += qi * key[j];
            }
        }
        for (double& s : sim) s /= tau;

        for (int i = 0; i < k; ++i) {
            const double* row = &sim[static_cast<std::size_t>(i) * k];
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j)
                if (include_positive_in_denominator || j != i) mx = std::max(mx, row[j]);
            double denom = 0.0;
            for (int j = 0; j < k; ++j) {
                const bool used = include_positive_in_denominator || j != i;
                soft[j] = used ? std::exp(row[j] - mx) : 0.0;
                denom += soft[j];
            }
            const double lse = mx + std::log(denom);
            total += -(row[i] - lse);
            if (!grad) continue;
            // d(-(s_ii - lse))/d h^{b,i} = -(h_r^{b,i} - sum_j softmax_j h_r^{b,j}) / tau
            const double coef = scale / (n_queries * tau);
            for (int j = 0; j < k; ++j) soft[j] /= denom;
            for (int d = 0; d < dim; ++d) {
                const double* key = h_r.plane_ptr(b, d);
                double expect = 0.0;
                for (int j = 0; j < k; ++j) expect += soft[j] * key[j];
                grad->plane_ptr(b, d)[i] += coef * (expect - key[i]);
            }
        }
    }
    return total / n_queries;
}

double consistency_mse(const Logits& a, const Logits& b, Logits* grad_a, Logits* grad_b, double scale) {
    if (!a.same_dims(b)) throw std::invalid_argument("consistency_mse: shape mismatch");
    check_grad(grad_a, a, "consistency_mse");
    check_grad(grad_b, b, "consistency_mse");
    const std::size_t n = a.size();
    if (n == 0) return 0.0;
    const auto av = a.values(), bv = b.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = av[i] - bv[i];
        sum += d * d;
    }
    if (grad_a || grad_b) {
        const double coef = 2.0 * scale / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double g = coef * (av[i] - bv[i]);
            if (grad_a) grad_a->values()[i] += g;
            if (grad_b) grad_b->values()[i] -= g;
        }
    }
    return sum / static_cast<double>(n);
}

double total_loss(double mss, double cont, double consist, const LossWeights& w) noexcept {
    return mss + w.lambda_cont * cont + w.lambda_consist * consist;
}

double pretrain_loss(const Logits& logits, std::span<const LabelMask> gt, double eps, Logits* grad, double scale) {
    if (static_cast<int>(gt.size()) != logits.batch()) throw std::invalid_argument("pretrain_loss: label count mismatch");
    const auto flat = flatten_labels(gt);
    const std::vector<double> ones(flat.size(), 1.0);
    const double dice = dice_loss_logits(logits, flat, ones, eps, grad, 0.5 * scale);
    const double ce = cross_entropy_loss(logits, flat, ones, grad, 0.5 * scale);
    return 0.5 * (dice + ce);
}

double pretrain_loss(const Logits& logits, const LabelMask& gt, double eps) {
    return pretrain_loss(logits, std::span(&gt, 1), eps);
}

}  // namespace switchlab
