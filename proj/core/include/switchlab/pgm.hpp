#pragma once

// Binary 8-bit PGM (P5) I/O. Images are scaled linearly between [0,1] and
// [0,255]; label and switch masks are stored as {0,255}.

#include <filesystem>

#include "switchlab/grid.hpp"

namespace switchlab {

void write_pgm(const std::filesystem::path& path, const Image& img);
void write_pgm(const std::filesystem::path& path, const LabelMask& mask);
void write_pgm(const std::filesystem::path& path, const BinaryMask& mask);
/// Writes a field after scaling [lo, hi] onto [0, 255]; used for heatmaps.
void write_pgm(const std::filesystem::path& path, const Field& field, double lo, double hi);

Image read_pgm_image(const std::filesystem::path& path);
LabelMask read_pgm_label(const std::filesystem::path& path);
BinaryMask read_pgm_mask(const std::filesystem::path& path);

}  // namespace switchlab
