#include "switchlab/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>

#include "switchlab/error.hpp"
#include "switchlab/pgm.hpp"
#include "switchlab/pseudo.hpp"

namespace switchlab {

namespace {

constexpr std::uint64_t kStreamItem = 0x17E4;
constexpr std::uint64_t kStreamSplit = 0x5B17;
constexpr double kPi = std::numbers::pi;

double smoothstep_edge(double signed_dist, double blur) {
    // 1 inside, 0 outside, logistic transition of width ~blur pixels
    return 1.0 / (1.0 + std::exp(-signed_dist / std::max(blur, 1e-6) * 2.0));
}

Field blur_field(const Field& f, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i) k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    for (double& v : k) v /= sum;
    const int h = f.height(), w = f.width();
    Field tmp(h, w), out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * f(r, std::clamp(c + i, 0, w - 1));
            tmp(r, c) = acc;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * tmp(std::clamp(r + i, 0, h - 1), c);
            out(r, c) = acc;
        }
    return out;
}

std::string item_name(const char* prefix, int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%05d.pgm", prefix, id);
    return buf;
}

}  // namespace

void SynthConfig::validate() const {
    if (height < 8 || width < 8) throw ConfigError("synth: image size must be at least 8x8");
    if (count < 1) throw ConfigError("synth: count must be >= 1");
    if (!(roi_min > 0.0 && roi_min <= roi_max && roi_max < 0.9))
        throw ConfigError("synth: roi fractions must satisfy 0 < roi_min <= roi_max < 0.9");
    if (speckle < 0.0) throw ConfigError("synth: speckle must be >= 0");
    if (shadow_prob < 0.0 || shadow_prob > 1.0) throw ConfigError("synth: shadow_prob must be in [0, 1]");
    if (!(contrast > 0.0 && contrast < 0.5)) throw ConfigError("synth: contrast must be in (0, 0.5)");
    if (gain_spread < 0.0 || gain_spread >= 0.5) throw ConfigError("synth: gain_spread must be in [0, 0.5)");
    if (boundary_blur < 0.0) throw ConfigError("synth: boundary_blur must be >= 0");
}

std::pair<Image, LabelMask> generate_sample(const SynthConfig& cfg, Rng& rng) {
    cfg.validate();
    const int h = cfg.height, w = cfg.width;
    const double hw = static_cast<double>(h) * w;

    // Shape: ellipse of the drawn area with a mild 3-5 lobe radial deformation.
    const double area = uniform_real(rng, cfg.roi_min, cfg.roi_max) * hw;
    const double aspect = uniform_real(rng, 0.55, 1.0);
    const double a = std::sqrt(area / (kPi * aspect));
    const double b = a * aspect;
    const double theta = uniform_real(rng, 0.0, kPi);
    const int lobes = uniform_int(rng, 3, 5);
    const double amp = uniform_real(rng, 0.0, 0.08);
    const double phase = uniform_real(rng, 0.0, 2.0 * kPi);
    const double reach = a * (1.0 + amp) + 2.0;
    const double cy = uniform_real(rng, std::min(reach, h / 2.0), std::max(h - reach, h / 2.0));
    const double cx = uniform_real(rng, std::min(reach, w / 2.0), std::max(w - reach, w / 2.0));

    // Intensity model.
    const double bg = uniform_real(rng, 0.5, 0.7);
    const double depth = uniform_real(rng, 0.0, 0.35);
    const double drop = uniform_real(rng, 1.5, 2.2) * cfg.contrast;
    const double gain = uniform_real(rng, 1.0 - cfg.gain_spread, 1.0 + cfg.gain_spread);
    const bool shadow = uniform_real(rng, 0.0, 1.0) < cfg.shadow_prob;
    const double sh_x = uniform_real(rng, 0.0, w);
    const double sh_w = uniform_real(rng, 0.08, 0.2) * w;
    const double sh_depth = uniform_real(rng, 0.3, 0.6);

    const double ct = std::cos(theta), st = std::sin(theta);
    LabelMask mask(h, w);
    Field inside(h, w), tissue(h, w), attenuation(h, w, 1.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double dy = r + 0.5 - cy, dx = c + 0.5 - cx;
            const double u = ct * dx + st * dy, v = -st * dx + ct * dy;
            const double rho = std::hypot(u, v);
            const double ang = std::atan2(v, u);
            // boundary radius of the ellipse along this direction, then deformed
            const double re = 1.0 / std::sqrt(std::pow(std::cos(ang) / a, 2) + std::pow(std::sin(ang) / b, 2));
            const double rb = re * (1.0 + amp * std::cos(lobes * ang + phase));
            mask(r, c) = rho <= rb;
            inside(r, c) = cfg.boundary_blur > 0.0 ? smoothstep_edge(rb - rho, cfg.boundary_blur)
                                                   : static_cast<double>(rho <= rb);
            tissue(r, c) = bg * (1.0 - depth * (r + 0.5) / h);
            if (shadow) {
                const double band = 1.0 / (1.0 + std::exp((std::abs(c + 0.5 - sh_x) - sh_w / 2.0) / 1.5));
                attenuation(r, c) = 1.0 - sh_depth * band * (r + 0.5) / h;
            }
        }
    mask = largest_connected_component(mask);

    Field noise(h, w);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : noise) v = gauss(rng);
    if (cfg.speckle > 0.0) {
        // Correlated grain: blur, then restore unit variance.
        noise = blur_field(noise, 0.7);
        double ss = 0.0;
        for (double v : noise) ss += v * v;
        const double sd = std::sqrt(ss / static_cast<double>(noise.size()));
        for (auto& v : noise) v /= sd;
    }

    Image img(h, w);
    const auto render = [&](double roi_drop) {
        for (std::size_t i = 0; i < img.size(); ++i) {
            const double level = std::max((tissue[i] - roi_drop * inside[i]) * attenuation[i], 0.02);
            const double n = std::max(1.0 + cfg.speckle * noise[i], 0.05);
            const double v = std::clamp(gain * level * n, 0.0, 1.0);
            img[i] = std::round(v * 255.0) / 255.0;  // 8-bit grid so PGM storage is lossless
        }
    };
    const auto mean_gap = [&] {
        double in = 0.0, out = 0.0;
        std::size_t n_in = 0;
        for (std::size_t i = 0; i < img.size(); ++i) {
            if (mask[i]) {
                in += img[i];
                ++n_in;
            } else {
                out += img[i];
            }
        }
        if (n_in == 0 || n_in == img.size()) return cfg.contrast;
        return out / static_cast<double>(img.size() - n_in) - in / static_cast<double>(n_in);
    };
    // Gain, shadow and clipping can eat into the drop; deepen it until the
    // rendered means are at least `contrast` apart.
    double roi_drop = drop;
    render(roi_drop);
    for (int k = 0; k < 50; ++k) {
        const double gap = mean_gap();
        if (gap >= cfg.contrast) break;
        roi_drop += (cfg.contrast - gap) / gain + 1.0 / 255.0;
        render(roi_drop);
    }
    return {std::move(img), std::move(mask)};
}

Sample generate_item(const SynthConfig& cfg, int id) {
    Rng rng(derive_seed(cfg.seed, kStreamItem, static_cast<std::uint64_t>(id)));
    auto [img, mask] = generate_sample(cfg, rng);
    return {id, std::move(img), std::move(mask)};
}

const LabelMask& SealedLabels::reveal(int id) const {
    const auto it = masks_.find(id);
    if (it == masks_.end()) throw std::out_of_range("no sealed label for id " + std::to_string(id));
    ++reads_;
    return it->second;
}

std::vector<int> SealedLabels::ids() const {
    std::vector<int> out;
    for (const auto& [id, m] : masks_) out.push_back(id);
    return out;
}

SplitCounts split_counts(int n, double labeled_ratio, const SplitRatios& ratios) {
    constexpr double kSlack = 1e-9;
    if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must be non-negative and sum to 1");
    if (!(labeled_ratio > 0.0 && labeled_ratio <= 1.0)) throw ConfigError("labeled_ratio must be in (0, 1]");
    SplitCounts s;
    s.train = static_cast<int>(std::floor(n * ratios.train + kSlack));
    s.val = static_cast<int>(std::floor(n * ratios.val + kSlack));
    s.test = n - s.train - s.val;
    s.labeled = static_cast<int>(std::floor(s.train * labeled_ratio + kSlack));
    if (s.labeled < 1) {
        const int need = static_cast<int>(std::ceil(1.0 / labeled_ratio - kSlack));
        throw ConfigError("labeled count is " + std::to_string(s.labeled) + "; at least 1 labeled item is required (" +
                          std::to_string(need) + " training items at this ratio)");
    }
    return s;
}

DatasetSplit make_dataset(const SynthConfig& cfg, double labeled_ratio, const SplitRatios& ratios,
                          std::uint64_t split_seed) {
    cfg.validate();
    const SplitCounts counts = split_counts(cfg.count, labeled_ratio, ratios);

    std::vector<int> ids(static_cast<std::size_t>(cfg.count));
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(derive_seed(split_seed, kStreamSplit));
    // Fisher-Yates with our own index draws: std::shuffle is not portable across libraries.
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1))]);

    const auto train_end = ids.begin() + counts.train;
    std::vector<int> train(ids.begin(), train_end);
    std::vector<int> val(train_end, train_end + counts.val);
    std::vector<int> test(train_end + counts.val, ids.end());
    // Labeled subset: first entries of a second shuffle of the training ids.
    for (std::size_t i = train.size(); i > 1; --i)
        std::swap(train[i - 1], train[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1))]);
    std::sort(train.begin(), train.begin() + counts.labeled);
    std::sort(train.begin() + counts.labeled, train.end());
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());

    DatasetSplit out;
    for (int i = 0; i < counts.train; ++i) {
        Sample s = generate_item(cfg, train[static_cast<std::size_t>(i)]);
        if (i < counts.labeled) {
            out.labeled.push_back(std::move(s));
        } else {
            out.sealed.seal(s.id, std::move(s.mask));
            out.unlabeled.push_back({s.id, std::move(s.image)});
        }
    }
    for (int id : val) out.val.push_back(generate_item(cfg, id));
    for (int id : test) out.test.push_back(generate_item(cfg, id));
    return out;
}

void write_dataset(const DatasetSplit& split, const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    for (const char* d : {"train", "val", "test", "sealed"}) fs::create_directories(root / d);
    nlohmann::json manifest;
    manifest["train"] = nlohmann::json::array();
    for (const auto& s : split.labeled) {
        write_pgm(root / "train" / item_name("img", s.id), s.image);
        write_pgm(root / "train" / item_name("msk", s.id), s.mask);
        manifest["train"].push_back({{"id", s.id}, {"labeled", true}});
    }
    for (const auto& u : split.unlabeled) {
        write_pgm(root / "train" / item_name("img", u.id), u.image);
        write_pgm(root / "sealed" / item_name("msk", u.id), split.sealed.reveal(u.id));
        manifest["train"].push_back({{"id", u.id}, {"labeled", false}});
    }
    for (const auto& [name, part] : {std::pair{"val", &split.val}, std::pair{"test", &split.test}}) {
        manifest[name] = nlohmann::json::array();
        for (const auto& s : *part) {
            write_pgm(root / name / item_name("img", s.id), s.image);
            write_pgm(root / name / item_name("msk", s.id), s.mask);
            manifest[name].push_back({{"id", s.id}, {"labeled", true}});
        }
    }
    std::ofstream f(root / "manifest.json");
    if (!f) throw DataError("cannot write manifest in " + root.string());
    f << manifest.dump(2) << '\n';
}

DatasetSplit read_dataset(const std::filesystem::path& root) {
    std::ifstream f(root / "manifest.json");
    if (!f) throw DataError("missing manifest.json in " + root.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    DatasetSplit out;
    try {
        for (const auto& e : manifest.at("train")) {
            const int id = e.at("id").get<int>();
            Image img = read_pgm_image(root / "train" / item_name("img", id));
            if (e.at("labeled").get<bool>()) {
                out.labeled.push_back({id, std::move(img), read_pgm_label(root / "train" / item_name("msk", id))});
            } else {
                out.unlabeled.push_back({id, std::move(img)});
                out.sealed.seal(id, read_pgm_label(root / "sealed" / item_name("msk", id)));
            }
        }
        for (const auto& [name, part] : {std::pair{"val", &out.val}, std::pair{"test", &out.test}})
            for (const auto& e : manifest.at(name)) {
                const int id = e.at("id").get<int>();
                part->push_back({id, read_pgm_image(root / name / item_name("img", id)),
                                 read_pgm_label(root / name / item_name("msk", id))});
            }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return out;
}

}  // namespace switchlab
