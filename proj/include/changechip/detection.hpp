// Change-detection core: per-pixel difference descriptors, PCA eigenspaces
// fitted on a non-overlapping window grid, per-pixel projection, and k-means
// clustering of the projected features into change-significance classes.
#pragma once

#include <changechip/image.hpp>
#include <changechip/linalg.hpp>

#include <cstdint>
#include <fstream>
#include <random>
#include <utility>
#include <vector>

namespace changechip {

// Per-channel absolute difference planes |I1 - I2| for R, G, B and grayscale.
struct DiffPlanes {
    Plane r, g, b, gray;

    int width() const { return r.width(); }
    int height() const { return r.height(); }
};

inline DiffPlanes build_diff(const RasterImage& ref, const RasterImage& aligned) {
    if (!ref.same_size(aligned)) throw Error("build_diff: image dimensions differ");
    const int w = ref.width(), h = ref.height();
    DiffPlanes d{Plane(w, h), Plane(w, h), Plane(w, h), Plane(w, h)};
    const size_t n = d.r.size();
    for (size_t i = 0; i < n; ++i) {
        d.r.data()[i] = std::abs(ref.r.data()[i] - aligned.r.data()[i]);
        d.g.data()[i] = std::abs(ref.g.data()[i] - aligned.g.data()[i]);
        d.b.data()[i] = std::abs(ref.b.data()[i] - aligned.b.data()[i]);
        d.gray.data()[i] =
            std::abs(luminance(ref.r.data()[i], ref.g.data()[i], ref.b.data()[i]) -
                     luminance(aligned.r.data()[i], aligned.g.data()[i], aligned.b.data()[i]));
    }
    return d;
}

// Training descriptors sampled on the non-overlapping h x h grid. RGB rows
// are the concatenation [R-window | G-window | B-window], row-major within
// each window; gray rows are the grayscale window.
struct DescriptorSet {
    Matrix rgb;   // M x 3h^2
    Matrix gray;  // M x h^2
    int window = 0;
    std::vector<std::pair<int, int>> centers;  // (row, col) per sample
};

namespace detail {

// Gather an h x h window around (row, col) into dst, zero padding outside.
inline void gather_window(const Plane& p, int row, int col, int h, double* dst) {
    const int half = h / 2;
    size_t k = 0;
    for (int dr = -half; dr <= half; ++dr) {
        const int rr = row + dr;
        if (rr < 0 || rr >= p.height()) {
            for (int dc = -half; dc <= half; ++dc) dst[k++] = 0.0;
            continue;
        }
        const double* src = p.data() + static_cast<size_t>(rr) * p.width();
        for (int dc = -half; dc <= half; ++dc) {
            const int cc = col + dc;
            dst[k++] = (cc < 0 || cc >= p.width()) ? 0.0 : src[cc];
        }
    }
}

}  // namespace detail

inline DescriptorSet sample_training_descriptors(const DiffPlanes& diff, int h) {
    if (h < 3 || h % 2 == 0) throw Error("descriptor window must be odd and >= 3");
    if (h > diff.width() || h > diff.height())
        throw Error("descriptor window larger than image");

    const int grid_rows = diff.height() / h;
    const int grid_cols = diff.width() / h;
    const int m = grid_rows * grid_cols;
    const int hh = h * h;

    DescriptorSet set;
    set.window = h;
    set.rgb = Matrix(m, 3 * hh);
    set.gray = Matrix(m, hh);
    set.centers.reserve(m);

    int sample = 0;
    for (int gr = 0; gr < grid_rows; ++gr) {
        for (int gc = 0; gc < grid_cols; ++gc, ++sample) {
            const int row = gr * h + h / 2;
            const int col = gc * h + h / 2;
            set.centers.emplace_back(row, col);
            double* rgb_row = set.rgb.row(sample);
            detail::gather_window(diff.r, row, col, h, rgb_row);
            detail::gather_window(diff.g, row, col, h, rgb_row + hh);
            detail::gather_window(diff.b, row, col, h, rgb_row + 2 * hh);
            detail::gather_window(diff.gray, row, col, h, set.gray.row(sample));
        }
    }
    return set;
}

// Mean vector plus the top-S orthonormal eigenvectors of the sample
// covariance, descending eigenvalue order. Sign convention: the
// largest-magnitude coordinate of each eigenvector is positive.
struct EigenSpace {
    std::vector<double> mean;
    Matrix basis;                    // S x d
    std::vector<double> eigenvalues;  // S, descending
    bool degenerate = false;

    int components() const { return basis.rows(); }
    int dim() const { return basis.cols(); }
};

inline EigenSpace fit_pca(const Matrix& samples, int components) {
    const int m = samples.rows();
    const int d = samples.cols();
    if (m < 2) throw Error("fit_pca: need at least 2 samples");
    if (components < 1 || components > std::min(m, d))
        throw Error("fit_pca: component count must be in [1, min(M, d)]");

    EigenSpace space;
    space.mean.assign(d, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* row = samples.row(i);
        for (int j = 0; j < d; ++j) space.mean[j] += row[j];
    }
    for (int j = 0; j < d; ++j) space.mean[j] /= m;

    Matrix cov(d, d);
    std::vector<double> centered(d);
    for (int i = 0; i < m; ++i) {
        const double* row = samples.row(i);
        for (int j = 0; j < d; ++j) centered[j] = row[j] - space.mean[j];
        for (int a = 0; a < d; ++a) {
            const double ca = centered[a];
            if (ca == 0.0) continue;
            double* cov_row = cov.row(a);
            for (int b = a; b < d; ++b) cov_row[b] += ca * centered[b];
        }
    }
    const double norm = 1.0 / (m - 1);
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            cov.at(a, b) *= norm;
            cov.at(b, a) = cov.at(a, b);
        }

    const SymmetricEigen eig = symmetric_eigen(cov);
    space.basis = Matrix(components, d);
    space.eigenvalues.resize(components);
    for (int s = 0; s < components; ++s) {
        space.eigenvalues[s] = std::max(0.0, eig.values[s]);
        int peak = 0;
        double peak_mag = -1.0;
        for (int j = 0; j < d; ++j) {
            const double mag = std::abs(eig.vectors.at(s, j));
            if (mag > peak_mag) {
                peak_mag = mag;
                peak = j;
            }
        }
        const double sign = eig.vectors.at(s, peak) < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < d; ++j) space.basis.at(s, j) = sign * eig.vectors.at(s, j);
    }
    space.degenerate = eig.values[0] <= 1e-15;
    return space;
}

inline std::vector<double> project_descriptor(const EigenSpace& space, const double* descriptor) {
    const int s_count = space.components();
    const int d = space.dim();
    std::vector<double> out(s_count);
    for (int s = 0; s < s_count; ++s) {
        const double* basis_row = space.basis.row(s);
        double acc = 0.0;
        for (int j = 0; j < d; ++j) acc += basis_row[j] * (descriptor[j] - space.mean[j]);
        out[s] = acc;
    }
    return out;
}

// One feature row per pixel: the centered RGB descriptor projected onto the
// RGB eigenspace, concatenated with the projected gray descriptor. Windows
// are centered at the pixel (overlapping) with zero padding at borders.
inline Matrix project_all_pixels(const DiffPlanes& diff, const EigenSpace& eig_rgb,
                                 const EigenSpace& eig_gray, int h) {
    const int hh = h * h;
    if (eig_rgb.dim() != 3 * hh || eig_gray.dim() != hh)
        throw Error("project_all_pixels: eigenspace dimension mismatch");

    const int width = diff.width(), height = diff.height();
    const int s_rgb = eig_rgb.components();
    const int s_gray = eig_gray.components();
    Matrix features(width * height, s_rgb + s_gray);

    // basis * (x - mean) = basis * x - offset with offset precomputed.
    std::vector<double> off_rgb(s_rgb, 0.0), off_gray(s_gray, 0.0);
    for (int s = 0; s < s_rgb; ++s)
        for (int j = 0; j < 3 * hh; ++j) off_rgb[s] += eig_rgb.basis.at(s, j) * eig_rgb.mean[j];
    for (int s = 0; s < s_gray; ++s)
        for (int j = 0; j < hh; ++j) off_gray[s] += eig_gray.basis.at(s, j) * eig_gray.mean[j];

    std::vector<double> rgb_buf(3 * hh), gray_buf(hh);
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            detail::gather_window(diff.r, row, col, h, rgb_buf.data());
            detail::gather_window(diff.g, row, col, h, rgb_buf.data() + hh);
            detail::gather_window(diff.b, row, col, h, rgb_buf.data() + 2 * hh);
            detail::gather_window(diff.gray, row, col, h, gray_buf.data());

            double* out = features.row(row * width + col);
            for (int s = 0; s < s_rgb; ++s) {
                const double* basis_row = eig_rgb.basis.row(s);
                double acc = 0.0;
                for (int j = 0; j < 3 * hh; ++j) acc += basis_row[j] * rgb_buf[j];
                out[s] = acc - off_rgb[s];
            }
            for (int s = 0; s < s_gray; ++s) {
                const double* basis_row = eig_gray.basis.row(s);
                double acc = 0.0;
                for (int j = 0; j < hh; ++j) acc += basis_row[j] * gray_buf[j];
                out[s_rgb + s] = acc - off_gray[s];
            }
        }
    }
    return features;
}

struct KmeansResult {
    std::vector<int> labels;
    Matrix centroids;  // n x d
    std::vector<uint8_t> empty_cluster;
    std::vector<double> objective_history;  // WCSS after each assignment step
    int iterations = 0;
};

namespace detail {

inline double next_u01(std::mt19937_64& rng) {
    return (rng() >> 11) * 0x1.0p-53;
}

inline double squared_distance(const double* a, const double* b, int d) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace detail

// Lloyd iterations from seeded kmeans++ initialization. Assignment ties go to
// the lowest centroid index. Empty clusters are re-seeded once from the point
// farthest from its assigned centroid; clusters still empty afterwards are
// carried as empty and flagged.
inline KmeansResult kmeans(const Matrix& points, int n, uint64_t seed, int max_iters = 300) {
    const int count = points.rows();
    const int d = points.cols();
    if (n < 2) throw Error("kmeans: need at least 2 clusters");
    if (n > count) throw Error("kmeans: more clusters than points");
    if (max_iters < 1) throw Error("kmeans: max_iters must be >= 1");

    std::mt19937_64 rng(seed);
    Matrix centroids(n, d);

    // kmeans++ seeding
    {
        const int first = std::min(static_cast<int>(detail::next_u01(rng) * count), count - 1);
        for (int j = 0; j < d; ++j) centroids.at(0, j) = points.at(first, j);
        std::vector<double> dist2(count);
        for (int i = 0; i < count; ++i)
            dist2[i] = detail::squared_distance(points.row(i), centroids.row(0), d);
        for (int k = 1; k < n; ++k) {
            double total = 0.0;
            for (int i = 0; i < count; ++i) total += dist2[i];
            int pick = 0;
            if (total > 0.0) {
                const double r = detail::next_u01(rng) * total;
                double acc = 0.0;
                int last_positive = -1;
                bool found = false;
                for (int i = 0; i < count; ++i) {
                    if (dist2[i] <= 0.0) continue;
                    last_positive = i;
                    acc += dist2[i];
                    if (acc >= r) {
                        pick = i;
                        found = true;
                        break;
                    }
                }
                if (!found) pick = last_positive;
            }
            // total == 0: every point coincides with an existing centroid;
            // duplicate deterministically, the empty-cluster rule handles it.
            for (int j = 0; j < d; ++j) centroids.at(k, j) = points.at(pick, j);
            for (int i = 0; i < count; ++i)
                dist2[i] = std::min(dist2[i],
                                    detail::squared_distance(points.row(i), centroids.row(k), d));
        }
    }

    KmeansResult result;
    result.labels.assign(count, -1);
    std::vector<int> prev_labels(count, -1);
    std::vector<double> point_dist(count, 0.0);
    bool reseed_used = false;
    bool reseeded_last_round = false;

    for (int iter = 0; iter < max_iters; ++iter) {
        // Assignment
        double wcss = 0.0;
        for (int i = 0; i < count; ++i) {
            const double* p = points.row(i);
            int best = 0;
            double best_d = detail::squared_distance(p, centroids.row(0), d);
            for (int k = 1; k < n; ++k) {
                const double dk = detail::squared_distance(p, centroids.row(k), d);
                if (dk < best_d) {
                    best_d = dk;
                    best = k;
                }
            }
            result.labels[i] = best;
            point_dist[i] = best_d;
            wcss += best_d;
        }
        result.objective_history.push_back(wcss);
        result.iterations = iter + 1;

        if (iter > 0 && !reseeded_last_round && result.labels == prev_labels) break;
        prev_labels = result.labels;
        reseeded_last_round = false;

        // Update
        Matrix sums(n, d);
        std::vector<int64_t> counts(n, 0);
        for (int i = 0; i < count; ++i) {
            double* srow = sums.row(result.labels[i]);
            const double* p = points.row(i);
            for (int j = 0; j < d; ++j) srow[j] += p[j];
            ++counts[result.labels[i]];
        }
        std::vector<int> empties;
        for (int k = 0; k < n; ++k) {
            if (counts[k] == 0) {
                empties.push_back(k);
                continue;
            }
            double* crow = centroids.row(k);
            const double* srow = sums.row(k);
            for (int j = 0; j < d; ++j) crow[j] = srow[j] / counts[k];
        }

        if (!empties.empty() && !reseed_used) {
            reseed_used = true;
            std::vector<uint8_t> taken(count, 0);
            for (int k : empties) {
                int far_idx = -1;
                double far_d = -1.0;
                for (int i = 0; i < count; ++i) {
                    if (taken[i]) continue;
                    if (point_dist[i] > far_d) {
                        far_d = point_dist[i];
                        far_idx = i;
                    }
                }
                if (far_idx < 0) break;
                taken[far_idx] = 1;
                for (int j = 0; j < d; ++j) centroids.at(k, j) = points.at(far_idx, j);
            }
            reseeded_last_round = true;
        }
    }

    result.centroids = std::move(centroids);
    result.empty_cluster.assign(n, 0);
    std::vector<int64_t> final_counts(n, 0);
    for (int label : result.labels) ++final_counts[label];
    for (int k = 0; k < n; ++k) result.empty_cluster[k] = final_counts[k] == 0 ? 1 : 0;
    return result;
}

// Per-pixel class labels in {0..n-1} plus the fitted centroids.
struct ClusterMap {
    int width = 0;
    int height = 0;
    int n = 0;
    std::vector<int> labels;  // row-major, width*height
    Matrix centroids;
    std::vector<uint8_t> empty_cluster;

    int label_at(int row, int col) const {
        return labels[static_cast<size_t>(row) * width + col];
    }
};

struct DetectionParams {
    int window = 5;   // h
    int classes = 16;  // n
    int s_rgb = 9;
    int s_gray = 3;
    uint64_t seed = 0;
    int kmeans_max_iters = 300;
};

inline ClusterMap detect_changes(const RasterImage& ref, const RasterImage& aligned,
                                 const DetectionParams& params = {}) {
    if (!ref.same_size(aligned)) throw Error("detect_changes: image dimensions differ");
    const int h = params.window;
    if (h < 3 || h % 2 == 0) throw Error("detect_changes: window must be odd and >= 3");
    if (params.s_rgb < 1 || params.s_rgb > 3 * h * h)
        throw Error("detect_changes: s_rgb must be in [1, 3h^2]");
    if (params.s_gray < 1 || params.s_gray > h * h)
        throw Error("detect_changes: s_gray must be in [1, h^2]");

    const DiffPlanes diff = build_diff(ref, aligned);
    const DescriptorSet training = sample_training_descriptors(diff, h);
    const EigenSpace eig_rgb = fit_pca(training.rgb, params.s_rgb);
    const EigenSpace eig_gray = fit_pca(training.gray, params.s_gray);
    const Matrix features = project_all_pixels(diff, eig_rgb, eig_gray, h);
    KmeansResult km = kmeans(features, params.classes, params.seed, params.kmeans_max_iters);

    ClusterMap map;
    map.width = ref.width();
    map.height = ref.height();
    map.n = params.classes;
    map.labels = std::move(km.labels);
    map.centroids = std::move(km.centroids);
    map.empty_cluster = std::move(km.empty_cluster);
    return map;
}

// Debug dump. Layout: int32 LE header H, W, d, n; then H*W*d float64 LE
// feature rows (row-major); then H*W int32 LE labels.
inline void write_feature_dump(const std::string& path, int height, int width,
                               const Matrix& features, const std::vector<int>& labels, int n) {
    if (features.rows() != width * height || labels.size() != static_cast<size_t>(width * height))
        throw Error("write_feature_dump: dimension mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    auto put_i32 = [&](int32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    put_i32(height);
    put_i32(width);
    put_i32(features.cols());
    put_i32(n);
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(features.data()),
              static_cast<std::streamsize>(sizeof(double) * features.rows() * features.cols()));
    for (int label : labels) put_i32(label);
    if (!out) throw Error("write failed: " + path);
}

}  // namespace changechip
