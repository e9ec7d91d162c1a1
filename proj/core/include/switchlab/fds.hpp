#pragma once

// Frequency domain switch: exchange of low-frequency Fourier amplitudes
// between an image pair while each image keeps its own phase.
//
// Conventions: the forward transform is unnormalized, the inverse carries
// the 1/(H*W) factor, and the zero-frequency bin of a shifted spectrum sits
// at (floor(H/2), floor(W/2)).

#include <complex>
#include <utility>
#include <vector>

#include "switchlab/grid.hpp"

namespace switchlab {

class ComplexSpectrum {
public:
    ComplexSpectrum() = default;
    ComplexSpectrum(int height, int width)
        : height_(height), width_(width), bins_(static_cast<std::size_t>(height) * width) {}

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return bins_.size(); }

    std::complex<double>& operator()(int r, int c) { return bins_[static_cast<std::size_t>(r) * width_ + c]; }
    const std::complex<double>& operator()(int r, int c) const { return bins_[static_cast<std::size_t>(r) * width_ + c]; }
    std::complex<double>& operator[](std::size_t i) { return bins_[i]; }
    const std::complex<double>& operator[](std::size_t i) const { return bins_[i]; }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::complex<double>> bins_;
};

struct AmplitudePhase {
    Field amplitude;  // >= 0
    Field phase;      // in (-pi, pi]; 0 where the amplitude is 0
};

struct FdsConfig {
    double rho = 0.0175;  // frequency area ratio

    void validate() const;
};

/// 2-D DFT of `img` with quadrants swapped so DC is at the center.
ComplexSpectrum fft2_shifted(const Image& img);

/// Undo the quadrant swap, inverse transform, and return the full complex result.
std::vector<std::complex<double>> ifft2_unshifted(const ComplexSpectrum& spec);

AmplitudePhase amplitude_phase(const ComplexSpectrum& spec);
ComplexSpectrum assemble(const AmplitudePhase& ap);

/// Bins (i, j) with |i - H/2| <= floor(H*rho)/2 and |j - W/2| <= floor(W*rho)/2,
/// evaluated in real arithmetic.
BinaryMask low_freq_region_mask(int h, int w, double rho);

/// Returns (a_x_r, a_u_r): each amplitude takes its partner's values inside `r`.
std::pair<Field, Field> amplitude_switch(const Field& a_x, const Field& a_u, const BinaryMask& r);

struct Reconstruction {
    Image image;
    /// Largest |imag| of the inverse transform, relative to the amplitude scale.
    double imaginary_residue = 0.0;
    bool residue_significant = false;  // residue > 1e-6
};

Reconstruction reconstruct_detailed(const AmplitudePhase& ap);
/// Real part of the inverse transform of A * exp(i P).
Image reconstruct(const AmplitudePhase& ap);

/// Full switch: (x, u) -> (x_r, u_r). Outputs are not clamped.
std::pair<Image, Image> fds_pair(const Image& x, const Image& u, const FdsConfig& cfg);
std::pair<Image, Image> fds_pair(const Image& x, const Image& u, const BinaryMask& region);

}  // namespace switchlab
