#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "nwsr/image.hpp"

namespace nwsr {

// Decoded PNG payload before grayscale conversion: 1 (gray) or 3 (RGB)
// interleaved channels, intensities scaled to [0, 1].
struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;  // interleaved, row-major

    double at(int u, int v, int c) const {
        return data[(static_cast<std::size_t>(v) * width + u) * channels + c];
    }
};

namespace detail {
struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

inline PngImage load_png(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("load_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("load_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("load_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_png: decode error in " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // PNG stores 16-bit big-endian
    png_read_update_info(png, info);

    PngImage img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    const int out_depth = png_get_bit_depth(png, info);
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_png: unsupported channel count in " + path);
    }

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<std::uint8_t> raw(row_bytes * img.height);
    std::vector<png_bytep> rows(img.height);
    for (int v = 0; v < img.height; ++v) rows[v] = raw.data() + row_bytes * v;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    const std::size_t n = img.data.size();
    if (out_depth == 16) {
        const auto* p = reinterpret_cast<const std::uint16_t*>(raw.data());
        for (std::size_t i = 0; i < n; ++i) img.data[i] = p[i] / 65535.0;
    } else {
        for (std::size_t i = 0; i < n; ++i) img.data[i] = raw[i] / 255.0;
    }
    return img;
}

// Grayscale PNG writer; intensities clamped to [0, 1] at this boundary only.
// bit_depth is 8 or 16 (16 preferred for HR/LR fidelity).
inline void save_png(const CartesianImage& img, const std::string& path, int bit_depth = 16) {
    if (bit_depth != 8 && bit_depth != 16)
        throw std::invalid_argument("save_png: bit depth must be 8 or 16");
    img.check_finite("save_png");
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("save_png: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("save_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("save_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_png: encode error for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    const auto clamp01 = [](double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); };
    if (bit_depth == 16) {
        std::vector<std::uint16_t> row(img.width);
        for (int v = 0; v < img.height; ++v) {
            for (int u = 0; u < img.width; ++u)
                row[u] = static_cast<std::uint16_t>(std::lround(clamp01(img.at(u, v)) * 65535.0));
            png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
        }
    } else {
        std::vector<std::uint8_t> row(img.width);
        for (int v = 0; v < img.height; ++v) {
            for (int u = 0; u < img.width; ++u)
                row[u] = static_cast<std::uint8_t>(std::lround(clamp01(img.at(u, v)) * 255.0));
            png_write_row(png, row.data());
        }
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(fp.get()) != 0) throw std::runtime_error("save_png: flush failed for " + path);
}

inline CartesianImage load_png_gray(const std::string& path) {
    const PngImage img = load_png(path);
    if (img.channels != 1)
        throw std::runtime_error("load_png_gray: " + path + " is not grayscale");
    CartesianImage out(img.width, img.height);
    out.pix = img.data;
    return out;
}

}  // namespace nwsr
