#pragma once

// Slow, independent reference implementations. Nothing here calls into the
// library code under test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

using cd = std::complex<double>;

// O(N^2) DFT with the zero frequency moved to (floor(H/2), floor(W/2)).
inline std::vector<cd> dft2_shifted(const std::vector<double>& x, int h, int w) {
    std::vector<cd> out(static_cast<std::size_t>(h) * w);
    for (int k = 0; k < h; ++k)
        for (int l = 0; l < w; ++l) {
            cd acc = 0.0;
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    const double ang = -2.0 * std::numbers::pi * (double(k) * r / h + double(l) * c / w);
                    acc += x[static_cast<std::size_t>(r) * w + c] * cd(std::cos(ang), std::sin(ang));
                }
            const int sk = (k + h / 2) % h, sl = (l + w / 2) % w;
            out[static_cast<std::size_t>(sk) * w + sl] = acc;
        }
    return out;
}

// Inverse of dft2_shifted, real part.
inline std::vector<double> idft2_shifted_real(const std::vector<cd>& spec, int h, int w) {
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            cd acc = 0.0;
            for (int sk = 0; sk < h; ++sk)
                for (int sl = 0; sl < w; ++sl) {
                    const int k = (sk - h / 2 + h) % h, l = (sl - w / 2 + w) % w;
                    const double ang = 2.0 * std::numbers::pi * (double(k) * r / h + double(l) * c / w);
                    acc += spec[static_cast<std::size_t>(sk) * w + sl] * cd(std::cos(ang), std::sin(ang));
                }
            out[static_cast<std::size_t>(r) * w + c] = acc.real() / (double(h) * w);
        }
    return out;
}

// Largest 4-connected foreground component by breadth-first flood fill.
// Components are discovered in raster order and replaced only by strictly
// larger ones, so ties keep the one whose first pixel comes first.
inline std::vector<std::uint8_t> flood_fill_lcc(const std::vector<std::uint8_t>& m, int h, int w) {
    std::vector<int> comp(m.size(), -1);
    int best = -1;
    std::size_t best_size = 0;
    int next = 0;
    for (int start = 0; start < h * w; ++start) {
        if (!m[start] || comp[start] >= 0) continue;
        std::deque<int> q{start};
        comp[start] = next;
        std::size_t size = 0;
        while (!q.empty()) {
            const int p = q.front();
            q.pop_front();
            ++size;
            const int r = p / w, c = p % w;
            const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& n : nb) {
                if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
                const int j = n[0] * w + n[1];
                if (m[j] && comp[j] < 0) {
                    comp[j] = next;
                    q.push_back(j);
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            best = next;
        }
        ++next;
    }
    std::vector<std::uint8_t> out(m.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = comp[i] == best && best >= 0;
    return out;
}

inline int count_components(const std::vector<std::uint8_t>& m, int h, int w) {
    std::vector<int> parent(m.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const int i = r * w + c;
            if (!m[i]) continue;
            if (c + 1 < w && m[i + 1]) parent[find(i)] = find(i + 1);
            if (r + 1 < h && m[i + w]) parent[find(i)] = find(i + w);
        }
    int n = 0;
    for (std::size_t i = 0; i < m.size(); ++i) n += m[i] && find(static_cast<int>(i)) == static_cast<int>(i);
    return n;
}

struct Pt {
    int r, c;
};

inline std::vector<Pt> boundary_points(const std::vector<std::uint8_t>& m, int h, int w) {
    std::vector<Pt> out;
    auto fg = [&](int r, int c) { return r >= 0 && r < h && c >= 0 && c < w && m[r * w + c] != 0; };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (fg(r, c) && (!fg(r - 1, c) || !fg(r + 1, c) || !fg(r, c - 1) || !fg(r, c + 1)))
                out.push_back({r, c});
    return out;
}

// Nearest distances from every point of a to the set b, by exhaustive search.
inline std::vector<double> all_pairs_nearest(const std::vector<Pt>& a, const std::vector<Pt>& b) {
    std::vector<double> out;
    for (const Pt& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const Pt& q : b) best = std::min(best, std::hypot(double(p.r - q.r), double(p.c - q.c)));
        out.push_back(best);
    }
    return out;
}

inline double percentile_linear(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * double(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

struct Distances {
    bool defined = false;
    double hd95 = 0.0, asd = 0.0, hausdorff = 0.0, max_pooled = 0.0;
};

inline Distances surface_distances(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, int h,
                                   int w) {
    const auto ba = boundary_points(a, h, w), bb = boundary_points(b, h, w);
    Distances d;
    if (ba.empty() || bb.empty()) return d;
    auto ab = all_pairs_nearest(ba, bb), ba_ = all_pairs_nearest(bb, ba);
    std::vector<double> pooled = ab;
    pooled.insert(pooled.end(), ba_.begin(), ba_.end());
    d.defined = true;
    d.hd95 = percentile_linear(pooled, 95.0);
    double s = 0.0;
    for (double v : pooled) s += v;
    d.asd = s / double(pooled.size());
    d.max_pooled = *std::max_element(pooled.begin(), pooled.end());
    d.hausdorff = d.max_pooled;
    return d;
}

// -(1/N) sum_b sum_i log( exp(<h_bi, r_bi>/tau) / sum_{j != i} exp(<h_bi, r_bj>/tau) ),
// h and r laid out as [b][d][k].
inline double infonce(const std::vector<double>& h, const std::vector<double>& r, int B, int D, int K, double tau,
                      bool with_positive = false) {
    auto at = [&](const std::vector<double>& v, int b, int d, int k) { return v[(std::size_t(b) * D + d) * K + k]; };
    long double total = 0.0L;
    for (int b = 0; b < B; ++b)
        for (int i = 0; i < K; ++i) {
            long double denom = 0.0L, pos = 0.0L;
            for (int j = 0; j < K; ++j) {
                long double dot = 0.0L;
                for (int d = 0; d < D; ++d) dot += (long double)at(h, b, d, i) * at(r, b, d, j);
                if (j == i) pos = dot / tau;
                if (j != i || with_positive) denom += std::exp(dot / tau);
            }
            total += -(pos - std::log(denom));
        }
    return static_cast<double>(total / (long double)(B * K));
}

}  // namespace oracle
