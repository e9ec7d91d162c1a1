#include "switchlab/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "switchlab/error.hpp"

namespace switchlab {

namespace {

struct RawPgm {
    int height = 0;
    int width = 0;
    int maxval = 255;
    std::vector<std::uint8_t> pixels;
};

void write_raw(const std::filesystem::path& path, int h, int w, const std::vector<std::uint8_t>& px) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << "P5\n" << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

int read_header_int(std::istream& in, const std::filesystem::path& path) {
    in >> std::ws;
    while (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        in >> std::ws;
    }
    int v = 0;
    if (!(in >> v)) throw DataError("malformed PGM header: " + path.string());
    return v;
}

RawPgm read_raw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw DataError("not a binary PGM (P5): " + path.string());
    RawPgm raw;
    raw.width = read_header_int(in, path);
    raw.height = read_header_int(in, path);
    raw.maxval = read_header_int(in, path);
    if (raw.width <= 0 || raw.height <= 0 || raw.maxval <= 0 || raw.maxval > 255)
        throw DataError("unsupported PGM geometry or depth: " + path.string());
    in.get();  // single whitespace after maxval
    raw.pixels.resize(static_cast<std::size_t>(raw.width) * raw.height);
    in.read(reinterpret_cast<char*>(raw.pixels.data()), static_cast<std::streamsize>(raw.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.pixels.size())) throw DataError("truncated PGM: " + path.string());
    return raw;
}

std::uint8_t to_byte(double v01) {
    const double c = std::clamp(v01, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

template <typename G>
void write_binary(const std::filesystem::path& path, const G& m) {
    std::vector<std::uint8_t> px(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) px[i] = m[i] ? 255 : 0;
    write_raw(path, m.height(), m.width(), px);
}

template <typename G>
G read_binary(const std::filesystem::path& path) {
    const RawPgm raw = read_raw(path);
    G out(raw.height, raw.width);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (2 * raw.pixels[i] > raw.maxval) ? 1 : 0;
    return out;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Image& img) {
    std::vector<std::uint8_t> px(img.size());
    std::transform(img.begin(), img.end(), px.begin(), to_byte);
    write_raw(path, img.height(), img.width(), px);
}

void write_pgm(const std::filesystem::path& path, const LabelMask& mask) { write_binary(path, mask); }
void write_pgm(const std::filesystem::path& path, const BinaryMask& mask) { write_binary(path, mask); }

void write_pgm(const std::filesystem::path& path, const Field& field, double lo, double hi) {
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<std::uint8_t> px(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) px[i] = to_byte((field[i] - lo) / span);
    write_raw(path, field.height(), field.width(), px);
}

Image read_pgm_image(const std::filesystem::path& path) {
    const RawPgm raw = read_raw(path);
    Image out(raw.height, raw.width);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(raw.pixels[i]) / raw.maxval;
    return out;
}

LabelMask read_pgm_label(const std::filesystem::path& path) { return read_binary<LabelMask>(path); }
BinaryMask read_pgm_mask(const std::filesystem::path& path) { return read_binary<BinaryMask>(path); }

}  // namespace switchlab
