// PNG and BMP file I/O, 8-bit RGB only. Loading maps channel value c in
// [0,255] to c/255; saving maps v to round(v*255) clamped to [0,255].
#pragma once

#include <changechip/image.hpp>

#include <png.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

namespace changechip {

inline uint8_t quantize8(double v) {
    double q = std::round(clamp01(v) * 255.0);
    return static_cast<uint8_t>(q);
}

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline RasterImage load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error("cannot open file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng init failed");
    }
    std::vector<uint8_t> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("failed to decode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (w == 0 || h == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("zero-dimension image: " + path);
    }
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("alpha channel not supported (expected 8-bit RGB): " + path);
    }
    if (bit_depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("16-bit PNG not supported (expected 8-bit RGB): " + path);
    }

    // Normalize grayscale / palette input to 8-bit RGB.
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_GRAY) png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("unsupported PNG channel layout (expected 8-bit RGB): " + path);
    }

    buffer.resize(static_cast<size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = buffer.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    RasterImage img(static_cast<int>(w), static_cast<int>(h));
    size_t k = 0;
    for (png_uint_32 y = 0; y < h; ++y)
        for (png_uint_32 x = 0; x < w; ++x) {
            img.r.at(y, x) = buffer[k++] / 255.0;
            img.g.at(y, x) = buffer[k++] / 255.0;
            img.b.at(y, x) = buffer[k++] / 255.0;
        }
    return img;
}

inline void save_png(const RasterImage& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("cannot write file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng init failed");
    }
    std::vector<uint8_t> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("failed to encode PNG: " + path);
    }
    png_init_io(png, fp.get());

    const int w = img.width();
    const int h = img.height();
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    buffer.resize(static_cast<size_t>(w) * h * 3);
    size_t k = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            buffer[k++] = quantize8(img.r.at(y, x));
            buffer[k++] = quantize8(img.g.at(y, x));
            buffer[k++] = quantize8(img.b.at(y, x));
        }
    rows.resize(h);
    for (int y = 0; y < h; ++y)
        rows[y] = buffer.data() + static_cast<size_t>(y) * w * 3;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline uint32_t read_u32le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
inline uint16_t read_u16le(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
inline void write_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}
inline void write_u16le(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

// 24-bit uncompressed BI_RGB, bottom-up.
inline RasterImage load_bmp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M')
        throw Error("not a BMP file: " + path);

    const uint32_t data_offset = read_u32le(&bytes[10]);
    const uint32_t header_size = read_u32le(&bytes[14]);
    if (header_size < 40) throw Error("unsupported BMP header: " + path);
    const int32_t w = static_cast<int32_t>(read_u32le(&bytes[18]));
    const int32_t h_raw = static_cast<int32_t>(read_u32le(&bytes[22]));
    const uint16_t bpp = read_u16le(&bytes[28]);
    const uint32_t compression = read_u32le(&bytes[30]);

    if (w <= 0 || h_raw == 0) throw Error("zero-dimension image: " + path);
    if (bpp == 32) throw Error("alpha channel not supported (expected 24-bit BMP): " + path);
    if (bpp != 24 || compression != 0)
        throw Error("unsupported BMP format (expected 24-bit uncompressed): " + path);

    const bool top_down = h_raw < 0;
    const int h = top_down ? -h_raw : h_raw;
    const size_t row_stride = (static_cast<size_t>(w) * 3 + 3) & ~size_t{3};
    if (bytes.size() < data_offset + row_stride * h)
        throw Error("truncated BMP file: " + path);

    RasterImage img(w, h);
    for (int y = 0; y < h; ++y) {
        const int src_row = top_down ? y : (h - 1 - y);
        const uint8_t* p = bytes.data() + data_offset + row_stride * src_row;
        for (int x = 0; x < w; ++x) {
            img.b.at(y, x) = p[3 * x + 0] / 255.0;
            img.g.at(y, x) = p[3 * x + 1] / 255.0;
            img.r.at(y, x) = p[3 * x + 2] / 255.0;
        }
    }
    return img;
}

inline void save_bmp(const RasterImage& img, const std::string& path) {
    const int w = img.width();
    const int h = img.height();
    const size_t row_stride = (static_cast<size_t>(w) * 3 + 3) & ~size_t{3};
    const uint32_t data_size = static_cast<uint32_t>(row_stride * h);

    std::vector<uint8_t> out;
    out.reserve(54 + data_size);
    out.push_back('B');
    out.push_back('M');
    write_u32le(out, 54 + data_size);
    write_u32le(out, 0);
    write_u32le(out, 54);
    write_u32le(out, 40);
    write_u32le(out, static_cast<uint32_t>(w));
    write_u32le(out, static_cast<uint32_t>(h));
    write_u16le(out, 1);
    write_u16le(out, 24);
    write_u32le(out, 0);
    write_u32le(out, data_size);
    write_u32le(out, 2835);  // 72 dpi
    write_u32le(out, 2835);
    write_u32le(out, 0);
    write_u32le(out, 0);

    for (int y = h - 1; y >= 0; --y) {
        size_t row_start = out.size();
        for (int x = 0; x < w; ++x) {
            out.push_back(quantize8(img.b.at(y, x)));
            out.push_back(quantize8(img.g.at(y, x)));
            out.push_back(quantize8(img.r.at(y, x)));
        }
        while (out.size() - row_start < row_stride) out.push_back(0);
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write file: " + path);
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw Error("write failed: " + path);
}

}  // namespace detail

inline RasterImage load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw Error("cannot open file: " + path);
    std::array<uint8_t, 8> magic{};
    probe.read(reinterpret_cast<char*>(magic.data()), magic.size());
    const std::streamsize got = probe.gcount();
    probe.close();

    static const uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (got >= 8 && std::memcmp(magic.data(), png_sig, 8) == 0) return detail::load_png(path);
    if (got >= 2 && magic[0] == 'B' && magic[1] == 'M') return detail::load_bmp(path);
    throw Error("unsupported image format (expected PNG or BMP): " + path);
}

inline void save_image(const RasterImage& img, const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png")
        detail::save_png(img, path);
    else if (ext == ".bmp")
        detail::save_bmp(img, path);
    else
        throw Error("unsupported output format (use .png or .bmp): " + path);
}

}  // namespace changechip
