// Exact histogram specification: remap an image so its per-channel histogram
// on the 8-bit grid equals the reference histogram exactly. Ties in pixel
// value are broken by a cascade of neighborhood averages, then by flat index,
// which makes the pixel ordering strict and the result deterministic.
#pragma once

#include <changechip/image.hpp>

#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

namespace changechip {

namespace detail {

// Box average of size (2k+1)^2 around each pixel, zero padding outside,
// computed with a summed-area table.
inline std::vector<double> box_average(const Plane& p, int k) {
    const int w = p.width(), h = p.height();
    const int sw = w + 1;
    std::vector<double> sat(static_cast<size_t>(w + 1) * (h + 1), 0.0);
    for (int r = 0; r < h; ++r) {
        double rowsum = 0.0;
        for (int c = 0; c < w; ++c) {
            rowsum += p.at(r, c);
            sat[static_cast<size_t>(r + 1) * sw + (c + 1)] =
                sat[static_cast<size_t>(r) * sw + (c + 1)] + rowsum;
        }
    }
    const double area = static_cast<double>(2 * k + 1) * (2 * k + 1);
    std::vector<double> out(static_cast<size_t>(w) * h);
    for (int r = 0; r < h; ++r) {
        const int r0 = std::max(0, r - k), r1 = std::min(h - 1, r + k);
        for (int c = 0; c < w; ++c) {
            const int c0 = std::max(0, c - k), c1 = std::min(w - 1, c + k);
            const double sum = sat[static_cast<size_t>(r1 + 1) * sw + (c1 + 1)] -
                               sat[static_cast<size_t>(r0) * sw + (c1 + 1)] -
                               sat[static_cast<size_t>(r1 + 1) * sw + c0] +
                               sat[static_cast<size_t>(r0) * sw + c0];
            out[static_cast<size_t>(r) * w + c] = sum / area;
        }
    }
    return out;
}

}  // namespace detail

using Histogram256 = std::array<int64_t, 256>;

inline int quantize_level(double v) {
    return static_cast<int>(std::round(clamp01(v) * 255.0));
}

inline Histogram256 histogram256(const Plane& p) {
    Histogram256 h{};
    const double* d = p.data();
    for (size_t i = 0; i < p.size(); ++i) ++h[quantize_level(d[i])];
    return h;
}

// Pixel indices sorted ascending by (value, 3x3 avg, 5x5 avg, ...,
// (2K+1)x(2K+1) avg, flat index).
inline std::vector<int> strict_order(const Plane& plane, int filter_levels) {
    if (filter_levels < 1) throw Error("strict_order: filter levels must be >= 1");
    const size_t n = plane.size();

    std::vector<std::vector<double>> keys;
    keys.reserve(filter_levels + 1);
    keys.emplace_back(plane.data(), plane.data() + n);
    for (int k = 1; k <= filter_levels; ++k)
        keys.push_back(detail::box_average(plane, k));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        for (const auto& key : keys) {
            if (key[a] != key[b]) return key[a] < key[b];
        }
        return a < b;
    });
    return order;
}

// Scale counts so they sum to `target_total`, largest-remainder rule.
inline Histogram256 apportion_histogram(const Histogram256& counts, int64_t target_total) {
    const int64_t source_total = std::accumulate(counts.begin(), counts.end(), int64_t{0});
    if (source_total == 0) throw Error("apportion_histogram: empty source histogram");
    if (source_total == target_total) return counts;

    Histogram256 out{};
    std::array<int64_t, 256> remainders{};
    int64_t assigned = 0;
    for (int i = 0; i < 256; ++i) {
        const int64_t numer = counts[i] * target_total;
        out[i] = numer / source_total;
        remainders[i] = numer % source_total;
        assigned += out[i];
    }
    std::array<int, 256> idx{};
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return remainders[a] > remainders[b]; });
    for (int j = 0; assigned < target_total; ++j, ++assigned) ++out[idx[j % 256]];
    return out;
}

inline Plane exact_histogram_match_plane(const Plane& src, const Plane& ref, int filter_levels) {
    const Histogram256 target =
        apportion_histogram(histogram256(ref), static_cast<int64_t>(src.size()));
    const std::vector<int> order = strict_order(src, filter_levels);

    Plane out(src.width(), src.height());
    size_t cursor = 0;
    for (int level = 0; level < 256; ++level) {
        const double value = level / 255.0;
        for (int64_t c = 0; c < target[level]; ++c)
            out.data()[order[cursor++]] = value;
    }
    return out;
}

// Remap src per channel so its histogram equals ref's on the 8-bit grid.
inline RasterImage exact_histogram_match(const RasterImage& src, const RasterImage& ref,
                                         int filter_levels = 5) {
    RasterImage out;
    out.r = exact_histogram_match_plane(src.r, ref.r, filter_levels);
    out.g = exact_histogram_match_plane(src.g, ref.g, filter_levels);
    out.b = exact_histogram_match_plane(src.b, ref.b, filter_levels);
    return out;
}

}  // namespace changechip
