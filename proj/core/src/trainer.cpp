#include "switchlab/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "switchlab/error.hpp"
#include "switchlab/pseudo.hpp"
#include "switchlab/random.hpp"

namespace switchlab {

namespace {

using nlohmann::json;

constexpr std::uint64_t kStreamPretrain = 0x9E7A;
constexpr std::uint64_t kStreamSelfTrain = 0x5E1F;
constexpr std::uint64_t kStreamInit = 0x1717;
constexpr std::uint64_t kStreamStrategy = 0x57A7;
constexpr std::size_t kEvalChunk = 16;

// ---------------------------------------------------------------------------
// Config (de)serialization

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path_ + "." + key + ": " + e.what());
        }
    }

    Reader sub(const char* key) {
        seen_.insert(key);
        static const json kEmpty = json::object();
        const auto it = j_.find(key);
        return Reader(it == j_.end() ? kEmpty : *it, path_ + "." + key);
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw ConfigError("unknown config key " + path_ + "." + item.key());
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

const char* to_string(Hd95Mode m) { return m == Hd95Mode::pooled ? "pooled" : "max_directed"; }
const char* to_string(ProjectorSource s) { return s == ProjectorSource::logits ? "logits" : "decoder_features"; }
const char* to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

template <typename Enum>
Enum parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, Enum>> options, const char* what) {
    for (const auto& [name, value] : options)
        if (s == name) return value;
    throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

// ---------------------------------------------------------------------------
// Batches

std::vector<int> draw_indices(Rng& rng, int count, int pool) {
    std::vector<int> perm(static_cast<std::size_t>(pool));
    for (int i = 0; i < pool; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int slot = i % pool;
        if (slot == 0) {
            for (std::size_t k = perm.size(); k > 1; --k)
                std::swap(perm[k - 1], perm[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(k) - 1))]);
        }
        out.push_back(perm[static_cast<std::size_t>(slot)]);
    }
    return out;
}

// Geometric ops first, so the geometric-only prefix is a valid weak view.
std::vector<AugmentationOp> draw_ops(const TrainConfig& cfg, Rng& rng) {
    if (!cfg.use_augment) return {};
    auto ops = sample_augmentations(cfg.augment, rng);
    std::stable_partition(ops.begin(), ops.end(), [](const AugmentationOp& op) { return is_geometric(op.kind); });
    return ops;
}

struct LabeledBatch {
    std::vector<Image> images;
    std::vector<LabelMask> labels;
};

LabeledBatch labeled_batch(const TrainConfig& cfg, const DatasetSplit& data, Rng& rng) {
    LabeledBatch b;
    for (int i : draw_indices(rng, cfg.labeled_batch, static_cast<int>(data.labeled.size()))) {
        const Sample& s = data.labeled[static_cast<std::size_t>(i)];
        auto [img, mask] = apply_augmentations(s.image, s.mask, draw_ops(cfg, rng));
        b.images.push_back(std::move(img));
        b.labels.push_back(std::move(mask));
    }
    return b;
}

struct UnlabeledBatch {
    std::vector<Image> weak;    // teacher view
    std::vector<Image> strong;  // student view
};

UnlabeledBatch unlabeled_batch(const TrainConfig& cfg, const DatasetSplit& data, Rng& rng) {
    UnlabeledBatch b;
    for (int i : draw_indices(rng, cfg.unlabeled_batch, static_cast<int>(data.unlabeled.size()))) {
        const auto ops = draw_ops(cfg, rng);
        const auto split = std::find_if(ops.begin(), ops.end(), [](const auto& op) { return !is_geometric(op.kind); });
        Image weak = apply_augmentations(data.unlabeled[static_cast<std::size_t>(i)].image,
                                         std::vector<AugmentationOp>(ops.begin(), split));
        b.strong.push_back(apply_augmentations(weak, std::vector<AugmentationOp>(split, ops.end())));
        b.weak.push_back(std::move(weak));
    }
    return b;
}

std::vector<LabelMask> pseudo_labels(const SegNet& net, const SegNetParams& teacher, std::span<const Image> images,
                                     bool lcc) {
    const Logits logits = net.forward(teacher, stack_images(images)).logits;
    std::vector<LabelMask> out;
    for (int n = 0; n < logits.batch(); ++n)
        out.push_back(lcc ? pseudo_label_from_logits(logits, n).mask : argmax_channels(logits, n));
    return out;
}

void check_finite(const LossBreakdown& l, const char* phase, long step) {
    if (!std::isfinite(l.total))
        throw std::domain_error(std::string(phase) + ": non-finite loss at step " + std::to_string(step));
}

EvalRecord eval_record(const std::string& phase, long step, const MetricReport& r) {
    return {phase, step, r.mean_dice, r.mean_iou, r.mean_hd95, r.mean_asd};
}

}  // namespace

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    synth.validate();
    net.validate();
    if (net.height != synth.height || net.width != synth.width)
        throw ConfigError("network input size must match the data size");
    if (!(lr0 >= 0.0)) throw ConfigError("lr0 must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (pretrain_iters < 1 || selftrain_iters < 1) throw ConfigError("iteration counts must be >= 1");
    if (labeled_batch < 2 || labeled_batch % 2 != 0) throw ConfigError("labeled_batch must be even and >= 2");
    if (unlabeled_batch < 2 || unlabeled_batch % 2 != 0) throw ConfigError("unlabeled_batch must be even and >= 2");
    if (use_mss && labeled_batch != unlabeled_batch)
        throw ConfigError("labeled and unlabeled sub-batches must be equal for pairwise switching");
    if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0)) throw ConfigError("ema_alpha must be in [0, 1]");
    mss.validate();
    fds.validate();
    loss.validate();
    augment.validate();
    if ((use_contrastive || use_consistency) && !use_fds)
        throw ConfigError("contrastive and consistency terms need the frequency-switched branch (use_fds)");
    if (use_fds && !use_contrastive && !use_consistency)
        throw ConfigError("use_fds has no effect without a contrastive or consistency term");
    if (use_fds && !use_mss) throw ConfigError("use_fds requires use_mss");
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
    if (!(labeled_ratio > 0.0 && labeled_ratio <= 1.0)) throw ConfigError("labeled_ratio must be in (0, 1]");
}

TrainConfig default_train_config() { return TrainConfig{}; }

TrainConfig parse_train_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    TrainConfig cfg = default_train_config();
    Reader root(j, "config");
    root.get("seed", cfg.seed);

    Reader d = root.sub("data");
    d.get("height", cfg.synth.height);
    d.get("width", cfg.synth.width);
    d.get("count", cfg.synth.count);
    d.get("roi_min", cfg.synth.roi_min);
    d.get("roi_max", cfg.synth.roi_max);
    d.get("speckle", cfg.synth.speckle);
    d.get("shadow_prob", cfg.synth.shadow_prob);
    d.get("contrast", cfg.synth.contrast);
    d.get("gain_spread", cfg.synth.gain_spread);
    d.get("boundary_blur", cfg.synth.boundary_blur);
    d.get("seed", cfg.synth.seed);
    d.get("labeled_ratio", cfg.labeled_ratio);
    std::vector<double> split{cfg.split.train, cfg.split.val, cfg.split.test};
    d.get("split", split);
    if (split.size() != 3) throw ConfigError("config.data.split must have three entries");
    cfg.split = {split[0], split[1], split[2]};
    d.get("dir", cfg.data_dir);
    d.finish();
    cfg.net.height = cfg.synth.height;
    cfg.net.width = cfg.synth.width;

    Reader n = root.sub("net");
    n.get("widths", cfg.net.widths);
    n.get("embed_dim", cfg.net.embed_dim);
    n.get("projector_channels", cfg.net.projector_channels);
    std::string source = to_string(cfg.net.projector_source);
    n.get("projector_source", source);
    cfg.net.projector_source = parse_enum<ProjectorSource>(
        source, {{"decoder_features", ProjectorSource::decoder_features}, {"logits", ProjectorSource::logits}},
        "projector_source");
    std::string precision = to_string(cfg.net.precision);
    n.get("precision", precision);
    cfg.net.precision = parse_enum<Precision>(
        precision, {{"float64", Precision::float64}, {"float32", Precision::float32}}, "precision");
    n.get("normalize_embedding", cfg.net.normalize_embedding);
    n.finish();

    Reader o = root.sub("optim");
    o.get("lr0", cfg.lr0);
    o.get("momentum", cfg.momentum);
    o.get("pretrain_iters", cfg.pretrain_iters);
    o.get("selftrain_iters", cfg.selftrain_iters);
    o.get("labeled_batch", cfg.labeled_batch);
    o.get("unlabeled_batch", cfg.unlabeled_batch);
    o.get("ema_alpha", cfg.ema_alpha);
    o.finish();

    Reader m = root.sub("mss");
    m.get("coarse_count", cfg.mss.coarse_count);
    m.get("fine_count", cfg.mss.fine_count);
    m.get("coarse_size", cfg.mss.coarse_size);
    m.get("fine_size", cfg.mss.fine_size);
    m.finish();

    Reader f = root.sub("fds");
    f.get("rho", cfg.fds.rho);
    f.finish();

    Reader l = root.sub("loss");
    l.get("w_b", cfg.loss.w_b);
    l.get("w_p", cfg.loss.w_p);
    l.get("lambda_cont", cfg.loss.lambda_cont);
    l.get("lambda_consist", cfg.loss.lambda_consist);
    l.get("tau", cfg.loss.tau);
    l.get("epsilon", cfg.loss.epsilon);
    l.get("include_positive_in_denominator", cfg.loss.include_positive_in_denominator);
    l.finish();

    Reader a = root.sub("augment");
    a.get("use_weak", cfg.augment.use_weak);
    a.get("use_strong", cfg.augment.use_strong);
    a.get("max_ops", cfg.augment.max_ops);
    a.finish();

    Reader s = root.sub("modules");
    s.get("mss", cfg.use_mss);
    s.get("fds", cfg.use_fds);
    s.get("augment", cfg.use_augment);
    s.get("contrastive", cfg.use_contrastive);
    s.get("consistency", cfg.use_consistency);
    s.get("teacher_lcc", cfg.teacher_lcc);
    s.finish();

    Reader e = root.sub("eval");
    e.get("every", cfg.eval_every);
    e.get("teacher", cfg.eval_teacher);
    std::string mode = to_string(cfg.hd95_mode);
    e.get("hd95_mode", mode);
    cfg.hd95_mode =
        parse_enum<Hd95Mode>(mode, {{"pooled", Hd95Mode::pooled}, {"max_directed", Hd95Mode::max_directed}}, "hd95_mode");
    e.finish();

    root.finish();
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_train_config(ss.str());
}

std::string to_json(const TrainConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["data"] = {{"height", c.synth.height},
                 {"width", c.synth.width},
                 {"count", c.synth.count},
                 {"roi_min", c.synth.roi_min},
                 {"roi_max", c.synth.roi_max},
                 {"speckle", c.synth.speckle},
                 {"shadow_prob", c.synth.shadow_prob},
                 {"contrast", c.synth.contrast},
                 {"gain_spread", c.synth.gain_spread},
                 {"boundary_blur", c.synth.boundary_blur},
                 {"seed", c.synth.seed},
                 {"labeled_ratio", c.labeled_ratio},
                 {"split", {c.split.train, c.split.val, c.split.test}},
                 {"dir", c.data_dir}};
    j["net"] = {{"widths", c.net.widths},
                {"embed_dim", c.net.embed_dim},
                {"projector_channels", c.net.projector_channels},
                {"projector_source", to_string(c.net.projector_source)},
                {"precision", to_string(c.net.precision)},
                {"normalize_embedding", c.net.normalize_embedding}};
    j["optim"] = {{"lr0", c.lr0},
                  {"momentum", c.momentum},
                  {"pretrain_iters", c.pretrain_iters},
                  {"selftrain_iters", c.selftrain_iters},
                  {"labeled_batch", c.labeled_batch},
                  {"unlabeled_batch", c.unlabeled_batch},
                  {"ema_alpha", c.ema_alpha}};
    j["mss"] = {{"coarse_count", c.mss.coarse_count},
                {"fine_count", c.mss.fine_count},
                {"coarse_size", c.mss.coarse_size},
                {"fine_size", c.mss.fine_size}};
    j["fds"] = {{"rho", c.fds.rho}};
    j["loss"] = {{"w_b", c.loss.w_b},
                 {"w_p", c.loss.w_p},
                 {"lambda_cont", c.loss.lambda_cont},
                 {"lambda_consist", c.loss.lambda_consist},
                 {"tau", c.loss.tau},
                 {"epsilon", c.loss.epsilon},
                 {"include_positive_in_denominator", c.loss.include_positive_in_denominator}};
    j["augment"] = {{"use_weak", c.augment.use_weak}, {"use_strong", c.augment.use_strong}, {"max_ops", c.augment.max_ops}};
    j["modules"] = {{"mss", c.use_mss},
                    {"fds", c.use_fds},
                    {"augment", c.use_augment},
                    {"contrastive", c.use_contrastive},
                    {"consistency", c.use_consistency},
                    {"teacher_lcc", c.teacher_lcc}};
    j["eval"] = {{"every", c.eval_every}, {"teacher", c.eval_teacher}, {"hd95_mode", to_string(c.hd95_mode)}};
    return j.dump(2);
}

// ---------------------------------------------------------------------------

std::string TrainLog::to_jsonl() const {
    std::string out;
    std::size_t e = 0;
    const auto emit_eval = [&](const EvalRecord& r) {
        out += json{{"phase", r.phase}, {"step", r.step}, {"eval", "val"}, {"dice", r.dice},
                    {"iou", r.iou},     {"hd95", r.hd95}, {"asd", r.asd}}
                   .dump();
        out += '\n';
    };
    for (const auto& s : steps) {
        while (e < evals.size() && evals[e].phase == s.phase && evals[e].step < s.step) emit_eval(evals[e++]);
        out += json{{"phase", s.phase},      {"step", s.step},         {"lr", s.lr},
                    {"mss", s.loss.mss},     {"cont", s.loss.cont},    {"consist", s.loss.consist},
                    {"total", s.loss.total}}
                   .dump();
        out += '\n';
    }
    while (e < evals.size()) emit_eval(evals[e++]);
    return out;
}

void TrainLog::write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write log " + path.string());
    f << to_jsonl();
}

DatasetSplit load_or_generate_data(const TrainConfig& cfg) {
    if (!cfg.data_dir.empty()) return read_dataset(cfg.data_dir);
    return make_dataset(cfg.synth, cfg.labeled_ratio, cfg.split, cfg.synth.seed);
}

PretrainResult pretrain(const TrainConfig& cfg, const DatasetSplit& data, long iters) {
    cfg.validate();
    if (iters < 0) iters = cfg.pretrain_iters;
    if (iters < 1) throw ConfigError("pretrain: iteration count must be >= 1");
    if (data.labeled.empty()) throw DataError("pretrain: no labeled items");
    const SegNet net(cfg.net);
    PretrainResult res;
    res.student = net.init_params(derive_seed(cfg.seed, kStreamInit));
    Sgd opt(net.param_count(), cfg.momentum);
    std::vector<double> grad(net.param_count());
    const int h = cfg.net.height, w = cfg.net.width;

    for (long k = 0; k < iters; ++k) {
        Rng rng(derive_seed(cfg.seed, kStreamPretrain, static_cast<std::uint64_t>(k)));
        LabeledBatch b = labeled_batch(cfg, data, rng);
        if (cfg.use_mss) {
            const std::size_t half = b.images.size() / 2;
            const BinaryMask m = generate_multiscale_mask(h, w, cfg.mss, rng);
            LabeledBatch mixed;
            for (std::size_t i = 0; i < half; ++i) {
                mixed.images.push_back(compose_masked(b.images[i], b.images[half + i], m));
                mixed.labels.push_back(compose_masked(b.labels[i], b.labels[half + i], m));
            }
            for (std::size_t i = 0; i < half; ++i) {
                mixed.images.push_back(compose_masked(b.images[half + i], b.images[i], m));
                mixed.labels.push_back(compose_masked(b.labels[half + i], b.labels[i], m));
            }
            b = std::move(mixed);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        LossBreakdown loss;
        loss.mss = supervised_objective(net, res.student, b.images, b.labels, cfg.loss.epsilon, grad);
        loss.total = loss.mss;
        check_finite(loss, "pretrain", k);
        const double lr = cosine_lr(k, iters, cfg.lr0);
        opt.step(res.student, grad, lr);
        res.log.steps.push_back({"pretrain", k, lr, loss});
    }
    res.velocity = opt.velocity();
    return res;
}

SelfTrainResult self_train(const TrainConfig& cfg, const DatasetSplit& data, const SegNetParams& init) {
    cfg.validate();
    if (data.labeled.empty()) throw DataError("self_train: no labeled items");
    if (cfg.use_mss && data.unlabeled.empty()) throw DataError("self_train: no unlabeled items");
    const SegNet net(cfg.net);
    net.check(init);
    const long iters = cfg.selftrain_iters;
    const int h = cfg.net.height, w = cfg.net.width;

    SelfTrainResult res;
    res.student = init;
    res.teacher = init;
    Sgd opt(net.param_count(), cfg.momentum);
    std::vector<double> grad(net.param_count());
    const LossSpec spec{true, cfg.use_contrastive, cfg.use_consistency, cfg.loss};

    const auto validate_now = [&](long step) {
        if (data.val.empty()) return;
        const SegNetParams& model = cfg.eval_teacher ? res.teacher : res.student;
        const MetricReport r = evaluate(net, model, data.val, cfg.hd95_mode);
        res.log.evals.push_back(eval_record("selftrain", step, r));
        if (r.mean_dice > res.best_val_dice) {
            res.best_val_dice = r.mean_dice;
            res.best_step = step;
            res.best = model;
        }
    };

    for (long k = 0; k < iters; ++k) {
        if (cfg.eval_every > 0 && k > 0 && k % cfg.eval_every == 0) validate_now(k);
        Rng rng(derive_seed(cfg.seed, kStreamSelfTrain, static_cast<std::uint64_t>(k)));
        std::fill(grad.begin(), grad.end(), 0.0);
        LossBreakdown loss;
        LabeledBatch lb = labeled_batch(cfg, data, rng);
        if (!cfg.use_mss) {
            loss.mss = supervised_objective(net, res.student, lb.images, lb.labels, cfg.loss.epsilon, grad);
            loss.total = loss.mss;
        } else {
            const UnlabeledBatch ub = unlabeled_batch(cfg, data, rng);
            const std::vector<LabelMask> pseudo = pseudo_labels(net, res.teacher, ub.weak, cfg.teacher_lcc);
            const std::size_t half = lb.images.size() / 2;
            MixedBatch mb;
            mb.mask = generate_multiscale_mask(h, w, cfg.mss, rng);
            for (std::size_t i = 0; i < half; ++i) {
                const Image& x1 = lb.images[i];
                const Image& x2 = lb.images[half + i];
                const Image& u1 = ub.strong[i];
                const Image& u2 = ub.strong[half + i];
                const SwitchedPair sp = switch_pair(x1, x2, u1, u2, mb.mask);
                mb.u_x.push_back(sp.u_x);
                mb.x_u.push_back(sp.x_u);
                mb.ux_base.push_back(pseudo[i]);
                mb.ux_patch.push_back(lb.labels[i]);
                mb.xu_base.push_back(lb.labels[half + i]);
                mb.xu_patch.push_back(pseudo[half + i]);
                if (cfg.use_fds) {
                    const auto [x1r, u1r] = fds_pair(x1, u1, cfg.fds);
                    const auto [x2r, u2r] = fds_pair(x2, u2, cfg.fds);
                    const SwitchedPair spr = switch_pair(x1r, x2r, u1r, u2r, mb.mask);
                    mb.u_x_r.push_back(spr.u_x);
                    mb.x_u_r.push_back(spr.x_u);
                }
            }
            loss = switch_objective(net, res.student, mb, spec, grad);
        }
        check_finite(loss, "self_train", k);
        const double lr = cosine_lr(k, iters, cfg.lr0);
        opt.step(res.student, grad, lr);
        ema_update(res.teacher, res.student, cfg.ema_alpha);
        res.log.steps.push_back({"selftrain", k, lr, loss});
    }
    validate_now(iters);
    if (res.best_step < 0) res.best = cfg.eval_teacher ? res.teacher : res.student;
    res.velocity = opt.velocity();
    return res;
}

std::vector<LabelMask> predict(const SegNet& net, const SegNetParams& params, std::span<const Image> images) {
    std::vector<LabelMask> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); i += kEvalChunk) {
        const auto chunk = images.subspan(i, std::min(kEvalChunk, images.size() - i));
        const Logits logits = net.forward(params, stack_images(chunk)).logits;
        for (int n = 0; n < logits.batch(); ++n) out.push_back(argmax_channels(logits, n));
    }
    return out;
}

MetricReport evaluate(const SegNet& net, const SegNetParams& params, std::span<const Sample> samples, Hd95Mode mode) {
    std::vector<Image> images;
    images.reserve(samples.size());
    for (const auto& s : samples) images.push_back(s.image);
    const auto preds = predict(net, params, images);
    std::vector<ImageMetrics> per;
    per.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        per.push_back(evaluate_pair(preds[i], samples[i].mask, std::to_string(samples[i].id), mode));
    return aggregate(std::move(per));
}

void write_metrics_csv(const MetricReport& report, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << "image_id,dice,iou,hd95,asd\n";
    char buf[256];
    for (const auto& m : report.per_image) {
        const auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("nan"); };
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,", m.id.c_str(), m.dice, m.iou);
        f << buf << opt(m.hd95) << ',' << opt(m.asd) << '\n';
    }
}

void write_metrics_json(const MetricReport& report, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    const json j{{"images", report.per_image.size()},
                 {"dice", report.mean_dice},
                 {"iou", report.mean_iou},
                 {"hd95", report.mean_hd95},
                 {"asd", report.mean_asd},
                 {"undefined_distance_count", report.undefined_distance_count}};
    f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

std::string StrategyReport::to_json() const {
    json rows_j = json::array();
    for (const auto& r : rows)
        rows_j.push_back({{"strategy", r.name},
                          {"mean", r.mean},
                          {"std", r.stddev},
                          {"gradient_variance", r.gradient_variance},
                          {"std_reduction_pct", r.std_reduction_pct},
                          {"gradient_variance_reduction_pct", r.gradvar_reduction_pct}});
    return json{{"height", height}, {"width", width}, {"iterations", iterations}, {"strategies", rows_j}}.dump(2);
}

StrategyReport strategy_analysis(int height, int width, int n_iter, std::uint64_t seed) {
    if (n_iter < 1) throw ConfigError("strategy analysis needs at least one iteration");
    const int side = std::min(height, width);
    const auto scaled = [side](int s) { return std::max(1, s * side / 256); };
    struct Entry {
        std::string name;
        MaskSampler sampler;
    };
    const MssConfig mss22{2, 2, scaled(128), scaled(32)};
    const MssConfig mss210{2, 10, scaled(128), scaled(32)};
    const std::vector<Entry> entries{
        {"BCP(2/3)", [=](Rng& r) { return generate_bcp_mask(height, width, 2.0 / 3.0, r); }},
        {"MSS(2,2)", [=](Rng& r) { return generate_multiscale_mask(height, width, mss22, r); }},
        {"MSS(2,10)", [=](Rng& r) { return generate_multiscale_mask(height, width, mss210, r); }},
    };

    StrategyReport rep;
    rep.height = height;
    rep.width = width;
    rep.iterations = n_iter;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Rng rng(derive_seed(seed, kStreamStrategy, i));
        Field map = switch_probability_map(entries[i].sampler, n_iter, rng);
        const FieldStats st = field_stats(map);
        rep.rows.push_back({entries[i].name, st.mean, st.stddev, mask_gradient_variance(map), 0.0, 0.0});
        rep.maps.push_back(std::move(map));
    }
    const StrategyRow& base = rep.rows.front();
    for (auto& r : rep.rows) {
        r.std_reduction_pct = 100.0 * (base.stddev - r.stddev) / base.stddev;
        r.gradvar_reduction_pct = 100.0 * (base.gradient_variance - r.gradient_variance) / base.gradient_variance;
    }
    return rep;
}

}  // namespace switchlab
