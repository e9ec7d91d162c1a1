#include "switchlab/fds.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "switchlab/error.hpp"

namespace switchlab {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftwBuffer alloc_buffer(std::size_t n) {
    auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * std::max<std::size_t>(n, 1)));
    if (!p) throw std::bad_alloc();
    return FftwBuffer(p);
}

// In-place 2-D transform of a row-major h*w buffer.
void transform(fftw_complex* buf, int h, int w, int sign) {
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_2d(h, w, buf, buf, sign, FFTW_ESTIMATE);
    }
    if (!plan) throw std::runtime_error("fftw: plan creation failed");
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

// Index of unshifted bin `k` after fftshift along an axis of length n.
inline int shifted_index(int k, int n) { return (k + n / 2) % n; }

}  // namespace

void FdsConfig::validate() const {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("fds: rho must lie in (0, 1)");
}

ComplexSpectrum fft2_shifted(const Image& img) {
    const int h = img.height(), w = img.width();
    ComplexSpectrum out(h, w);
    if (img.empty()) return out;
    auto buf = alloc_buffer(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (!std::isfinite(img[i])) throw std::domain_error("fft2_shifted: non-finite pixel");
        buf[i][0] = img[i];
        buf[i][1] = 0.0;
    }
    transform(buf.get(), h, w, FFTW_FORWARD);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const auto& b = buf[static_cast<std::size_t>(r) * w + c];
            out(shifted_index(r, h), shifted_index(c, w)) = {b[0], b[1]};
        }
    return out;
}

std::vector<std::complex<double>> ifft2_unshifted(const ComplexSpectrum& spec) {
    const int h = spec.height(), w = spec.width();
    std::vector<std::complex<double>> out(spec.size());
    if (spec.size() == 0) return out;
    auto buf = alloc_buffer(spec.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const auto v = spec(shifted_index(r, h), shifted_index(c, w));
            auto& b = buf[static_cast<std::size_t>(r) * w + c];
            b[0] = v.real();
            b[1] = v.imag();
        }
    transform(buf.get(), h, w, FFTW_BACKWARD);
    const double scale = 1.0 / (static_cast<double>(h) * w);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {buf[i][0] * scale, buf[i][1] * scale};
    return out;
}

AmplitudePhase amplitude_phase(const ComplexSpectrum& spec) {
    AmplitudePhase ap{Field(spec.height(), spec.width()), Field(spec.height(), spec.width())};
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double a = std::abs(spec[i]);
        ap.amplitude[i] = a;
        double p = a == 0.0 ? 0.0 : std::arg(spec[i]);
        if (p <= -std::numbers::pi) p = std::numbers::pi;
        ap.phase[i] = p;
    }
    return ap;
}

ComplexSpectrum assemble(const AmplitudePhase& ap) {
    require_same_shape(ap.amplitude, ap.phase, "assemble");
    ComplexSpectrum spec(ap.amplitude.height(), ap.amplitude.width());
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = std::polar(ap.amplitude[i], ap.phase[i]);
    return spec;
}

BinaryMask low_freq_region_mask(int h, int w, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("low_freq_region_mask: rho must lie in (0, 1)");
    const double r_h = std::floor(h * rho) / 2.0;
    const double r_w = std::floor(w * rho) / 2.0;
    const double ch = h / 2.0, cw = w / 2.0;
    BinaryMask m(h, w);
    for (int i = 0; i < h; ++i) {
        if (std::abs(i - ch) > r_h) continue;
        for (int j = 0; j < w; ++j)
            if (std::abs(j - cw) <= r_w) m(i, j) = 1;
    }
    return m;
}

std::pair<Field, Field> amplitude_switch(const Field& a_x, const Field& a_u, const BinaryMask& r) {
    require_same_shape(a_x, a_u, "amplitude_switch");
    require_same_shape(a_x, r, "amplitude_switch");
    Field x_r = a_x, u_r = a_u;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!r[i]) continue;
        x_r[i] = a_u[i];
        u_r[i] = a_x[i];
    }
    return {std::move(x_r), std::move(u_r)};
}

Reconstruction reconstruct_detailed(const AmplitudePhase& ap) {
    const auto full = ifft2_unshifted(assemble(ap));
    Reconstruction rec{Image(ap.amplitude.height(), ap.amplitude.width())};
    double max_imag = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) {
        rec.image[i] = full[i].real();
        max_imag = std::max(max_imag, std::abs(full[i].imag()));
    }
    // Scale: the largest pixel magnitude the amplitude spectrum can produce.
    double amp_sum = 0.0;
    for (double a : ap.amplitude) amp_sum += a;
    const double scale = full.empty() ? 1.0 : amp_sum / static_cast<double>(full.size());
    rec.imaginary_residue = scale > 0.0 ? max_imag / scale : max_imag;
    rec.residue_significant = rec.imaginary_residue > 1e-6;
    return rec;
}

Image reconstruct(const AmplitudePhase& ap) { return reconstruct_detailed(ap).image; }

std::pair<Image, Image> fds_pair(const Image& x, const Image& u, const BinaryMask& region) {
    require_same_shape(x, u, "fds_pair");
    require_same_shape(x, region, "fds_pair");
    const AmplitudePhase apx = amplitude_phase(fft2_shifted(x));
    const AmplitudePhase apu = amplitude_phase(fft2_shifted(u));
    auto [ax_r, au_r] = amplitude_switch(apx.amplitude, apu.amplitude, region);
    Image x_r = reconstruct(AmplitudePhase{std::move(ax_r), apx.phase});
    Image u_r = reconstruct(AmplitudePhase{std::move(au_r), apu.phase});
    return {std::move(x_r), std::move(u_r)};
}

std::pair<Image, Image> fds_pair(const Image& x, const Image& u, const FdsConfig& cfg) {
    cfg.validate();
    return fds_pair(x, u, low_freq_region_mask(x.height(), x.width(), cfg.rho));
}

}  // namespace switchlab
