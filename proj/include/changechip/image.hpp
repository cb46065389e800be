// Image representation shared by the whole pipeline: planes of real values
// in [0,1], RGB raster images, grayscale conversion and window extraction.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace changechip {

// Single exception type for all domain errors; the CLI maps these to
// stage-tagged diagnostics and exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Axis-aligned rectangle, x = column, y = row.
struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

// A 2-D plane of reals, row-major.
class Plane {
public:
    Plane() = default;
    Plane(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          data_(static_cast<size_t>(width) * height, fill) {
        if (width < 1 || height < 1)
            throw Error("plane dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return data_.size(); }

    double& at(int row, int col) { return data_[idx(row, col)]; }
    double at(int row, int col) const { return data_[idx(row, col)]; }

    // Zero outside the plane.
    double at_or_zero(int row, int col) const {
        if (row < 0 || row >= height_ || col < 0 || col >= width_) return 0.0;
        return data_[idx(row, col)];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_size(const Plane& o) const {
        return width_ == o.width_ && height_ == o.height_;
    }

    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height_ && col >= 0 && col < width_;
    }

private:
    size_t idx(int row, int col) const {
        return static_cast<size_t>(row) * width_ + col;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

// H x W x 3 image, channel values as reals in [0,1].
struct RasterImage {
    Plane r, g, b;

    RasterImage() = default;
    RasterImage(int width, int height, double fr = 0.0, double fg = 0.0, double fb = 0.0)
        : r(width, height, fr), g(width, height, fg), b(width, height, fb) {}

    int width() const { return r.width(); }
    int height() const { return r.height(); }

    bool same_size(const RasterImage& o) const { return r.same_size(o.r); }

    Plane& channel(int c) {
        switch (c) {
            case 0: return r;
            case 1: return g;
            default: return b;
        }
    }
    const Plane& channel(int c) const {
        switch (c) {
            case 0: return r;
            case 1: return g;
            default: return b;
        }
    }

    void set(int row, int col, double vr, double vg, double vb) {
        r.at(row, col) = vr;
        g.at(row, col) = vg;
        b.at(row, col) = vb;
    }
};

// An h x h window around a center pixel; positions outside the source plane
// contribute exactly zero.
struct PixelWindow {
    int center_row = 0;
    int center_col = 0;
    int size = 0;
    std::vector<double> values;  // row-major, size*size entries

    double at(int wr, int wc) const {
        return values[static_cast<size_t>(wr) * size + wc];
    }
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// gray = 0.3 R + 0.59 G + 0.11 B, values stay real (no rounding).
inline double luminance(double r, double g, double b) {
    return 0.3 * r + 0.59 * g + 0.11 * b;
}

inline Plane to_grayscale(const RasterImage& img) {
    Plane out(img.width(), img.height());
    const size_t n = out.size();
    const double* pr = img.r.data();
    const double* pg = img.g.data();
    const double* pb = img.b.data();
    double* po = out.data();
    for (size_t i = 0; i < n; ++i) po[i] = luminance(pr[i], pg[i], pb[i]);
    return out;
}

inline PixelWindow extract_window(const Plane& plane, int row, int col, int h) {
    if (h < 1 || h % 2 == 0) throw Error("window size must be odd and >= 1");
    if (!plane.in_bounds(row, col)) throw Error("window center out of bounds");
    PixelWindow w;
    w.center_row = row;
    w.center_col = col;
    w.size = h;
    w.values.resize(static_cast<size_t>(h) * h);
    const int half = h / 2;
    size_t k = 0;
    for (int dr = -half; dr <= half; ++dr)
        for (int dc = -half; dc <= half; ++dc)
            w.values[k++] = plane.at_or_zero(row + dr, col + dc);
    return w;
}

inline RasterImage crop(const RasterImage& img, const Rect& rect) {
    if (rect.width < 1 || rect.height < 1)
        throw Error("crop rectangle must have positive size");
    if (rect.x < 0 || rect.y < 0 || rect.x + rect.width > img.width() ||
        rect.y + rect.height > img.height())
        throw Error("crop rectangle out of image bounds");
    RasterImage out(rect.width, rect.height);
    for (int row = 0; row < rect.height; ++row)
        for (int col = 0; col < rect.width; ++col)
            out.set(row, col,
                    img.r.at(rect.y + row, rect.x + col),
                    img.g.at(rect.y + row, rect.x + col),
                    img.b.at(rect.y + row, rect.x + col));
    return out;
}

}  // namespace changechip
