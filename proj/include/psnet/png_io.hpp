#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "psnet/errors.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

namespace detail {

struct FileHandle {
    std::FILE* f = nullptr;
    explicit FileHandle(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (f) std::fclose(f);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

}  // namespace detail

// Reads an 8-bit PNG into CHW float, range [-1, 1] via v / 127.5 - 1.
// Grayscale files load as 1 channel, color as 3; alpha is dropped.
inline Tensor<float> load_png(const std::string& path) {
    detail::FileHandle fh(path, "rb");
    if (!fh.f) throw DataError("cannot open image '" + path + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng init failed");
    }
    std::vector<png_byte> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("failed to decode PNG '" + path + "'");
    }
    png_init_io(png, fh.f);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int H = static_cast<int>(png_get_image_height(png, info));
    const int W = static_cast<int>(png_get_image_width(png, info));
    const int C = static_cast<int>(png_get_channels(png, info));
    if (C != 1 && C != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported channel count " + std::to_string(C) + " in '" + path + "'");
    }
    const std::size_t stride = png_get_rowbytes(png, info);
    raw.resize(stride * static_cast<std::size_t>(H));
    rows.resize(static_cast<std::size_t>(H));
    for (int y = 0; y < H; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + stride * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor<float> out({C, H, W});
    for (int y = 0; y < H; ++y) {
        const png_byte* row = raw.data() + stride * static_cast<std::size_t>(y);
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
                out.at(c, y, x) = static_cast<float>(row[x * C + c]) / 127.5f - 1.0f;
    }
    return out;
}

// Writes CHW float in [-1, 1] as an 8-bit PNG (1 or 3 channels). Fixed
// settings keep the output bytes a pure function of the pixel data.
inline void save_png(const std::string& path, const Tensor<float>& chw) {
    if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3))
        throw DataError("save_png: expected CHW with 1 or 3 channels, got " + chw.shape_string());
    const int C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);

    detail::FileHandle fh(path, "wb");
    if (!fh.f) throw DataError("cannot write image '" + path + "'");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng init failed");
    }
    std::vector<png_byte> raw(static_cast<std::size_t>(H) * W * C);
    std::vector<png_bytep> rows(static_cast<std::size_t>(H));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to encode PNG '" + path + "'");
    }
    png_init_io(png, fh.f);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
                 C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

    for (int y = 0; y < H; ++y) {
        png_byte* row = raw.data() + static_cast<std::size_t>(y) * W * C;
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                const double v = (static_cast<double>(chw.at(c, y, x)) + 1.0) * 127.5;
                const long q = std::lround(v);
                row[x * C + c] = static_cast<png_byte>(q < 0 ? 0 : (q > 255 ? 255 : q));
            }
        rows[static_cast<std::size_t>(y)] = row;
    }
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace psnet
