#pragma once

#include <cmath>
#include <complex>
#include <string>

#include "psnet/errors.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

struct EyePair {
    double lx = 0, ly = 0, rx = 0, ry = 0;
};

// Canonical eye geometry in a size x size frame: horizontally symmetric,
// configurable height fraction and inter-ocular span fraction.
inline EyePair canonical_eyes(int size, double height_frac = 0.35, double span_frac = 0.46) {
    const double cy = height_frac * size;
    const double cx = 0.5 * (size - 1);
    const double half = 0.5 * span_frac * size;
    return {cx - half, cy, cx + half, cy};
}

namespace detail {

template <typename T>
T bilinear(const Tensor<T>& img, int c, double x, double y) {
    const int H = img.dim(1), W = img.dim(2);
    x = std::min(std::max(x, 0.0), static_cast<double>(W - 1));
    y = std::min(std::max(y, 0.0), static_cast<double>(H - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, W - 1);
    const int y1 = std::min(y0 + 1, H - 1);
    const double fx = x - x0, fy = y - y0;
    const double v00 = img.at(c, y0, x0), v01 = img.at(c, y0, x1);
    const double v10 = img.at(c, y1, x0), v11 = img.at(c, y1, x1);
    return static_cast<T>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                          fy * ((1 - fx) * v10 + fx * v11));
}

}  // namespace detail

// Similarity-transform alignment: maps the source eye pair onto the canonical
// pair and resamples an out_size x out_size window (bilinear, edge-clamped).
template <typename T>
Tensor<T> align_and_crop(const Tensor<T>& src, const EyePair& eyes, int out_size,
                         const EyePair& canon) {
    if (src.rank() != 3) throw ShapeError("align: expected CHW image, got " + src.shape_string());
    const std::complex<double> v(eyes.rx - eyes.lx, eyes.ry - eyes.ly);
    const std::complex<double> u(canon.rx - canon.lx, canon.ry - canon.ly);
    if (std::abs(v) == 0.0) throw DataError("align: degenerate eye pair (zero distance)");
    const std::complex<double> m = v / u;  // output frame -> source frame

    const int C = src.dim(0);
    Tensor<T> out({C, out_size, out_size});
    for (int y = 0; y < out_size; ++y)
        for (int x = 0; x < out_size; ++x) {
            const std::complex<double> q(x - canon.lx, y - canon.ly);
            const std::complex<double> p = m * q;
            const double sx = eyes.lx + p.real();
            const double sy = eyes.ly + p.imag();
            for (int c = 0; c < C; ++c) out.at(c, y, x) = detail::bilinear(src, c, sx, sy);
        }
    return out;
}

// Maps a source-frame point into the aligned output frame (used to verify
// that eyes land on the canonical coordinates).
inline void align_map_to_output(const EyePair& eyes, const EyePair& canon, double sx, double sy,
                                double& ox, double& oy) {
    const std::complex<double> v(eyes.rx - eyes.lx, eyes.ry - eyes.ly);
    const std::complex<double> u(canon.rx - canon.lx, canon.ry - canon.ly);
    if (std::abs(v) == 0.0) throw DataError("align: degenerate eye pair (zero distance)");
    const std::complex<double> q = std::complex<double>(sx - eyes.lx, sy - eyes.ly) * (u / v);
    ox = canon.lx + q.real();
    oy = canon.ly + q.imag();
}

// Exact-window crop, no resampling.
template <typename T>
Tensor<T> crop_window(const Tensor<T>& img, int crop, int oy, int ox) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (crop > H || crop > W)
        throw DataError("crop size " + std::to_string(crop) + " exceeds image " +
                        img.shape_string());
    if (oy < 0 || ox < 0 || oy + crop > H || ox + crop > W)
        throw DataError("crop window out of bounds");
    Tensor<T> out({C, crop, crop});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < crop; ++y)
            for (int x = 0; x < crop; ++x) out.at(c, y, x) = img.at(c, oy + y, ox + x);
    return out;
}

// Deterministic evaluation-time crop.
template <typename T>
Tensor<T> center_crop(const Tensor<T>& img, int crop) {
    return crop_window(img, crop, (img.dim(1) - crop) / 2, (img.dim(2) - crop) / 2);
}

// Seeded random crop; offset order (row, then column) is part of the
// determinism contract.
template <typename T>
Tensor<T> random_crop(const Tensor<T>& img, int crop, rng::Stream& rs) {
    const int H = img.dim(1), W = img.dim(2);
    if (crop > H || crop > W)
        throw DataError("crop size " + std::to_string(crop) + " exceeds image " +
                        img.shape_string());
    const int oy = static_cast<int>(rs.uniform_int(0, H - crop));
    const int ox = static_cast<int>(rs.uniform_int(0, W - crop));
    return crop_window(img, crop, oy, ox);
}

}  // namespace psnet
