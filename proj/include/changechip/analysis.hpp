// Post-processing of the cluster map: per-class MSE between the registered
// pair, rank-ordered heat map, DBSCAN selection of change classes, binary
// change mask and overlay rendering.
#pragma once

#include <changechip/detection.hpp>
#include <changechip/image.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace changechip {

struct ClassStats {
    int class_id = 0;
    int64_t pixel_count = 0;
    double mse = 0.0;     // valid only when has_mse
    bool has_mse = false;  // false for empty classes
    int rank = -1;         // ascending-MSE rank over nonempty classes
    bool selected = false;
};

// MSE(C_i) = 1/(3|C_i|) * sum over class pixels and RGB channels of the
// squared channel difference. Empty classes get no MSE and stay unselected.
inline std::vector<ClassStats> class_mse(const RasterImage& ref, const RasterImage& aligned,
                                         const ClusterMap& cm) {
    if (!ref.same_size(aligned) || ref.width() != cm.width || ref.height() != cm.height)
        throw Error("class_mse: dimension mismatch");

    std::vector<ClassStats> stats(cm.n);
    for (int k = 0; k < cm.n; ++k) stats[k].class_id = k;

    std::vector<double> sums(cm.n, 0.0);
    const size_t total = cm.labels.size();
    for (size_t i = 0; i < total; ++i) {
        const int label = cm.labels[i];
        const double dr = ref.r.data()[i] - aligned.r.data()[i];
        const double dg = ref.g.data()[i] - aligned.g.data()[i];
        const double db = ref.b.data()[i] - aligned.b.data()[i];
        sums[label] += dr * dr + dg * dg + db * db;
        ++stats[label].pixel_count;
    }
    for (int k = 0; k < cm.n; ++k) {
        if (stats[k].pixel_count > 0) {
            stats[k].mse = sums[k] / (3.0 * stats[k].pixel_count);
            stats[k].has_mse = true;
        }
    }

    // Ranks: ascending MSE over nonempty classes, ties by class id.
    std::vector<int> nonempty;
    for (int k = 0; k < cm.n; ++k)
        if (stats[k].has_mse) nonempty.push_back(k);
    std::sort(nonempty.begin(), nonempty.end(), [&](int a, int b) {
        if (stats[a].mse != stats[b].mse) return stats[a].mse < stats[b].mse;
        return a < b;
    });
    for (size_t i = 0; i < nonempty.size(); ++i) stats[nonempty[i]].rank = static_cast<int>(i);
    return stats;
}

namespace detail {

inline void hsv_to_rgb(double hue_deg, double sat, double val, double& r, double& g, double& b) {
    const double c = val * sat;
    const double hp = hue_deg / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    if (hp < 1)      { r1 = c; g1 = x; }
    else if (hp < 2) { r1 = x; g1 = c; }
    else if (hp < 3) { g1 = c; b1 = x; }
    else if (hp < 4) { g1 = x; b1 = c; }
    else if (hp < 5) { r1 = x; b1 = c; }
    else             { r1 = c; b1 = x; }
    const double m = val - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

}  // namespace detail

// Hue for a class of the given rank among k nonempty classes: a linear sweep
// from blue (240 deg, minimum MSE) to red (0 deg, maximum MSE).
inline double heatmap_hue(int rank, int nonempty_count) {
    if (nonempty_count <= 1) return 240.0;
    return 240.0 * (1.0 - static_cast<double>(rank) / (nonempty_count - 1));
}

inline RasterImage render_heatmap(const ClusterMap& cm, const std::vector<ClassStats>& stats) {
    int nonempty_count = 0;
    for (const auto& s : stats)
        if (s.has_mse) ++nonempty_count;

    std::vector<std::array<double, 3>> palette(cm.n, {0.0, 0.0, 1.0});
    for (const auto& s : stats) {
        if (!s.has_mse) continue;
        double r, g, b;
        detail::hsv_to_rgb(heatmap_hue(s.rank, nonempty_count), 1.0, 1.0, r, g, b);
        palette[s.class_id] = {r, g, b};
    }

    RasterImage out(cm.width, cm.height);
    for (int row = 0; row < cm.height; ++row)
        for (int col = 0; col < cm.width; ++col) {
            const auto& c = palette[cm.label_at(row, col)];
            out.set(row, col, c[0], c[1], c[2]);
        }
    return out;
}

// Standard DBSCAN on the real line. Returns one cluster label per input
// value; noise points get -1 (only possible when min_pts > 1). Deterministic:
// clusters are discovered in ascending value order.
inline std::vector<int> dbscan_1d(const std::vector<double>& values, double eps, int min_pts = 1) {
    if (values.empty()) throw Error("dbscan_1d: values must be nonempty");
    if (!(eps > 0.0)) throw Error("dbscan_1d: eps must be positive");
    if (min_pts < 1) throw Error("dbscan_1d: min_pts must be >= 1");

    const int n = static_cast<int>(values.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (values[a] != values[b]) return values[a] < values[b];
        return a < b;
    });

    // Neighborhood of sorted position p is the window [lo, hi] with
    // |value - values[p]| <= eps; it always contains p itself.
    auto neighborhood = [&](int pos, int& lo, int& hi) {
        lo = pos;
        while (lo > 0 && values[order[pos]] - values[order[lo - 1]] <= eps) --lo;
        hi = pos;
        while (hi + 1 < n && values[order[hi + 1]] - values[order[pos]] <= eps) ++hi;
    };

    std::vector<uint8_t> is_core(n, 0);
    for (int p = 0; p < n; ++p) {
        int lo, hi;
        neighborhood(p, lo, hi);
        is_core[p] = (hi - lo + 1) >= min_pts ? 1 : 0;
    }

    std::vector<int> labels(n, -1);  // indexed by original value index
    int next_cluster = 0;
    for (int p = 0; p < n; ++p) {
        if (!is_core[p] || labels[order[p]] != -1) continue;
        const int cluster = next_cluster++;
        std::vector<int> frontier{p};
        labels[order[p]] = cluster;
        while (!frontier.empty()) {
            const int q = frontier.back();
            frontier.pop_back();
            int lo, hi;
            neighborhood(q, lo, hi);
            for (int r = lo; r <= hi; ++r) {
                if (labels[order[r]] != -1) continue;
                labels[order[r]] = cluster;
                if (is_core[r]) frontier.push_back(r);
            }
        }
    }
    return labels;
}

// Run DBSCAN (min_pts = 1) on the nonempty-class MSE scores and discard the
// entire cluster containing the minimum score; everything else is selected.
// A single cluster means "no changes": nothing is selected.
inline void select_change_classes(std::vector<ClassStats>& stats, double eps) {
    std::vector<int> nonempty;
    std::vector<double> scores;
    for (const auto& s : stats) {
        if (s.has_mse) {
            nonempty.push_back(s.class_id);
            scores.push_back(s.mse);
        }
    }
    for (auto& s : stats) s.selected = false;
    if (nonempty.empty()) throw Error("select_change_classes: no nonempty class");

    const std::vector<int> labels = dbscan_1d(scores, eps, 1);
    const int distinct = 1 + *std::max_element(labels.begin(), labels.end());
    if (distinct <= 1) return;  // everything is one cluster: no changes

    int min_pos = 0;
    for (size_t i = 1; i < scores.size(); ++i)
        if (scores[i] < scores[min_pos]) min_pos = static_cast<int>(i);
    const int discard_cluster = labels[min_pos];

    for (size_t i = 0; i < nonempty.size(); ++i)
        stats[nonempty[i]].selected = labels[i] != discard_cluster;
}

struct ChangeMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;  // 0/1, row-major
    std::vector<int> selected_classes;

    bool at(int row, int col) const {
        return data[static_cast<size_t>(row) * width + col] != 0;
    }
    int64_t count() const {
        return std::accumulate(data.begin(), data.end(), int64_t{0});
    }
};

inline ChangeMask binary_mask(const ClusterMap& cm, const std::vector<ClassStats>& stats) {
    std::vector<uint8_t> selected_lut(cm.n, 0);
    ChangeMask mask;
    mask.width = cm.width;
    mask.height = cm.height;
    for (const auto& s : stats) {
        if (s.selected) {
            selected_lut[s.class_id] = 1;
            mask.selected_classes.push_back(s.class_id);
        }
    }
    mask.data.resize(cm.labels.size());
    for (size_t i = 0; i < cm.labels.size(); ++i) mask.data[i] = selected_lut[cm.labels[i]];
    return mask;
}

// Mask pixels drawn in saturated red over the reference at a 50% blend.
inline RasterImage overlay(const RasterImage& ref, const ChangeMask& mask) {
    if (ref.width() != mask.width || ref.height() != mask.height)
        throw Error("overlay: dimension mismatch");
    RasterImage out = ref;
    for (size_t i = 0; i < mask.data.size(); ++i) {
        if (!mask.data[i]) continue;
        out.r.data()[i] = 0.5 * ref.r.data()[i] + 0.5;
        out.g.data()[i] = 0.5 * ref.g.data()[i];
        out.b.data()[i] = 0.5 * ref.b.data()[i];
    }
    return out;
}

inline RasterImage mask_to_image(const ChangeMask& mask) {
    RasterImage out(mask.width, mask.height);
    for (size_t i = 0; i < mask.data.size(); ++i) {
        const double v = mask.data[i] ? 1.0 : 0.0;
        out.r.data()[i] = v;
        out.g.data()[i] = v;
        out.b.data()[i] = v;
    }
    return out;
}

}  // namespace changechip
