#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "psnet/align.hpp"
#include "psnet/errors.hpp"
#include "psnet/manifest.hpp"
#include "psnet/png_io.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet::toy {

struct ToyDatasetSpec {
    int n_identities = 16;
    int images_per_identity = 4;
    int image_size = 72;
    std::uint64_t seed = 1;
};

namespace detail {

struct Primitive {
    // 0 disk, 1 ring, 2 triangle-ish wedge, 3 bar
    int kind = 0;
    double cx = 0.5, cy = 0.5;
    double r0 = 0.1, r1 = 0.05;  // size / thickness
    double angle = 0.0;
    double color[3] = {0, 0, 0};
};

// Identity appearance: background gradient plus a handful of soft shapes and
// two fixed dark eye disks. All coordinates are in the normalized unit square.
struct IdentityScene {
    double bg0[3], bg1[3];
    double grad_angle = 0.0;
    std::vector<Primitive> prims;
    double eye_lx = 0.27, eye_y = 0.35, eye_rx = 0.73;
    double eye_r = 0.045;
};

inline IdentityScene make_identity(std::uint64_t seed, int id) {
    rng::Stream rs(rng::derive(seed, "identity", static_cast<std::uint64_t>(id)));
    IdentityScene s;
    // Luminance-banded palette: backgrounds stay midtone while every shape
    // commits to a dark or light tonal mass. Identity then survives grayscale
    // sketching, while hue remains free so photos keep cues sketches lack.
    for (int c = 0; c < 3; ++c) s.bg0[c] = rs.uniform(-0.2, 0.3);
    for (int c = 0; c < 3; ++c) s.bg1[c] = rs.uniform(-0.2, 0.3);
    s.grad_angle = rs.uniform(0.0, 6.283185307179586);
    const int n = static_cast<int>(rs.uniform_int(3, 5));
    for (int k = 0; k < n; ++k) {
        Primitive p;
        p.kind = static_cast<int>(rs.uniform_int(0, 3));
        p.cx = rs.uniform(0.2, 0.8);
        p.cy = rs.uniform(0.2, 0.8);
        p.r0 = rs.uniform(0.08, 0.22);
        p.r1 = rs.uniform(0.02, 0.06);
        p.angle = rs.uniform(0.0, 6.283185307179586);
        const bool dark = rs.uniform() < 0.5;
        for (int c = 0; c < 3; ++c)
            p.color[c] = dark ? rs.uniform(-0.95, -0.35) : rs.uniform(0.45, 0.95);
        s.prims.push_back(p);
    }
    s.eye_lx = 0.27 + rs.uniform(-0.02, 0.02);
    s.eye_rx = 0.73 + rs.uniform(-0.02, 0.02);
    s.eye_y = 0.35 + rs.uniform(-0.02, 0.02);
    s.eye_r = rs.uniform(0.035, 0.055);
    return s;
}

inline double smooth_edge(double sd, double soft) {
    // 1 inside, 0 outside, smooth ramp of width 2*soft
    const double t = std::clamp(0.5 - 0.5 * sd / soft, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

inline double prim_sdf(const Primitive& p, double x, double y) {
    const double dx0 = x - p.cx, dy0 = y - p.cy;
    const double ca = std::cos(p.angle), sa = std::sin(p.angle);
    const double dx = ca * dx0 + sa * dy0;
    const double dy = -sa * dx0 + ca * dy0;
    switch (p.kind) {
        case 0: return std::sqrt(dx * dx + dy * dy) - p.r0;
        case 1: return std::abs(std::sqrt(dx * dx + dy * dy) - p.r0) - p.r1;
        case 2: {
            // wedge: half-plane pair forming a soft triangle
            const double d1 = dy - p.r0;
            const double d2 = -dy - 0.6 * dx - p.r0 * 0.2;
            const double d3 = -dy + 0.6 * dx - p.r0 * 0.2;
            return std::max(d1, std::max(d2, d3));
        }
        default: return std::max(std::abs(dx) - p.r0, std::abs(dy) - p.r1);
    }
}

// Geometry jitter in the unit square: rotate/scale about the centre, then
// translate. eye coordinates go through the forward map; pixels are rendered
// through the inverse.
struct Jitter {
    double theta = 0.0, scale = 1.0, tx = 0.0, ty = 0.0, brightness = 0.0;
};

inline Jitter make_jitter(std::uint64_t seed, int id, int img) {
    rng::Stream rs(rng::derive(seed, "image", static_cast<std::uint64_t>(id),
                               static_cast<std::uint64_t>(img)));
    Jitter j;
    j.theta = rs.uniform(-0.08, 0.08);
    j.scale = rs.uniform(0.95, 1.05);
    j.tx = rs.uniform(-0.03, 0.03);
    j.ty = rs.uniform(-0.03, 0.03);
    j.brightness = rs.uniform(-0.08, 0.08);
    return j;
}

inline void forward_point(const Jitter& j, double x, double y, double& ox, double& oy) {
    const double ca = std::cos(j.theta), sa = std::sin(j.theta);
    const double dx = x - 0.5, dy = y - 0.5;
    ox = 0.5 + j.tx + j.scale * (ca * dx - sa * dy);
    oy = 0.5 + j.ty + j.scale * (sa * dx + ca * dy);
}

inline void inverse_point(const Jitter& j, double x, double y, double& ox, double& oy) {
    const double ca = std::cos(j.theta), sa = std::sin(j.theta);
    const double dx = (x - 0.5 - j.tx) / j.scale, dy = (y - 0.5 - j.ty) / j.scale;
    ox = 0.5 + ca * dx + sa * dy;
    oy = 0.5 - sa * dx + ca * dy;
}

inline void scene_color(const IdentityScene& s, double x, double y, double rgb[3]) {
    const double g = std::clamp(
        0.5 + (x - 0.5) * std::cos(s.grad_angle) + (y - 0.5) * std::sin(s.grad_angle), 0.0, 1.0);
    for (int c = 0; c < 3; ++c) rgb[c] = s.bg0[c] * (1 - g) + s.bg1[c] * g;
    const double soft = 0.012;
    for (const auto& p : s.prims) {
        const double a = smooth_edge(prim_sdf(p, x, y), soft);
        for (int c = 0; c < 3; ++c) rgb[c] = rgb[c] * (1 - a) + p.color[c] * a;
    }
    const double del =
        smooth_edge(std::sqrt((x - s.eye_lx) * (x - s.eye_lx) + (y - s.eye_y) * (y - s.eye_y)) -
                        s.eye_r,
                    soft);
    const double der =
        smooth_edge(std::sqrt((x - s.eye_rx) * (x - s.eye_rx) + (y - s.eye_y) * (y - s.eye_y)) -
                        s.eye_r,
                    soft);
    for (int c = 0; c < 3; ++c) {
        rgb[c] = rgb[c] * (1 - del) + (-0.95) * del;
        rgb[c] = rgb[c] * (1 - der) + (-0.95) * der;
    }
}

inline Tensor<float> render_photo(const IdentityScene& s, const Jitter& j, int size) {
    Tensor<float> img({3, size, size});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5) / size, v = (y + 0.5) / size;
            double ix, iy, rgb[3];
            inverse_point(j, u, v, ix, iy);
            scene_color(s, ix, iy, rgb);
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = static_cast<float>(std::clamp(rgb[c], -1.0, 1.0));
        }
    return img;
}

}  // namespace detail

// Pencil-style sketch rendering: Sobel edge strokes plus tonal shading of
// regions darker than the image's mean luminance, mapped to [-1, 1] with
// strokes dark on a white page. Both terms vanish on a constant photo, and
// the tonal term is invariant to a global brightness shift.
template <typename T>
Tensor<T> photo_to_sketch(const Tensor<T>& photo, double tau = 0.8) {
    if (photo.rank() != 3 || photo.dim(0) != 3)
        throw ShapeError("photo_to_sketch: expected 3xHxW, got " + photo.shape_string());
    const int H = photo.dim(1), W = photo.dim(2);
    Tensor<double> lum({H, W});
    double mean = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            lum.at(y, x) = 0.299 * photo.at(0, y, x) + 0.587 * photo.at(1, y, x) +
                           0.114 * photo.at(2, y, x);
            mean += lum.at(y, x);
        }
    mean /= static_cast<double>(H) * W;
    auto L = [&](int y, int x) {
        return lum.at(std::clamp(y, 0, H - 1), std::clamp(x, 0, W - 1));
    };
    Tensor<T> out({1, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double gx = (L(y - 1, x + 1) + 2 * L(y, x + 1) + L(y + 1, x + 1)) -
                              (L(y - 1, x - 1) + 2 * L(y, x - 1) + L(y + 1, x - 1));
            const double gy = (L(y + 1, x - 1) + 2 * L(y + 1, x) + L(y + 1, x + 1)) -
                              (L(y - 1, x - 1) + 2 * L(y - 1, x) + L(y - 1, x + 1));
            const double e2 = gx * gx + gy * gy;
            const double edge = e2 / (e2 + tau * tau);
            // Dead zone keeps a constant photo exactly blank despite mean
            // rounding.
            const double dark = std::max(0.0, mean - lum.at(y, x) - 1e-6);
            const double tone = dark / (dark + 0.6);
            const double strength = std::min(1.0, edge + tone);
            out.at(0, y, x) = static_cast<T>(1.0 - 2.0 * strength);
        }
    return out;
}

// Generates the synthetic photo/sketch corpus under out_dir and returns the
// manifest it wrote. Reruns with identical spec are byte-identical.
inline Manifest generate_dataset(const ToyDatasetSpec& spec, const std::filesystem::path& out_dir) {
    if (spec.n_identities < 2)
        throw ConfigError("toy dataset needs at least 2 identities, got " +
                          std::to_string(spec.n_identities));
    if (spec.images_per_identity < 1)
        throw ConfigError("toy dataset needs at least 1 image per identity");
    if (spec.image_size < 16)
        throw ConfigError("toy dataset image size must be >= 16, got " +
                          std::to_string(spec.image_size));

    const auto img_dir = out_dir / "images";
    std::filesystem::create_directories(img_dir);

    std::ofstream tsv(out_dir / "manifest.tsv", std::ios::binary);
    if (!tsv) throw DataError("cannot write manifest under " + out_dir.string());
    tsv << "# identity\tmodality\tpath\tleft_eye\tright_eye\n";

    const int size = spec.image_size;
    char buf[160];
    for (int i = 0; i < spec.n_identities; ++i) {
        const auto scene = detail::make_identity(spec.seed, i);
        for (int j = 0; j < spec.images_per_identity; ++j) {
            const auto jit = detail::make_jitter(spec.seed, i, j);
            auto base = detail::render_photo(scene, jit, size);
            auto sketch = photo_to_sketch(base);
            auto photo = base;
            for (std::int64_t t = 0; t < photo.numel(); ++t)
                photo[t] = std::clamp(photo[t] + static_cast<float>(jit.brightness), -1.0f, 1.0f);

            double lx, ly, rx, ry;
            detail::forward_point(jit, scene.eye_lx, scene.eye_y, lx, ly);
            detail::forward_point(jit, scene.eye_rx, scene.eye_y, rx, ry);
            // unit square -> pixel centres
            lx = lx * size - 0.5; ly = ly * size - 0.5;
            rx = rx * size - 0.5; ry = ry * size - 0.5;

            std::snprintf(buf, sizeof buf, "id%03d_p%d.png", i, j);
            const std::string pname = buf;
            std::snprintf(buf, sizeof buf, "id%03d_s%d.png", i, j);
            const std::string sname = buf;
            save_png(img_dir / pname, photo);
            save_png(img_dir / sname, sketch);

            std::snprintf(buf, sizeof buf, "id%03d\tphoto\timages/%s\t%.2f,%.2f\t%.2f,%.2f\n",
                          i, pname.c_str(), lx, ly, rx, ry);
            tsv << buf;
            std::snprintf(buf, sizeof buf, "id%03d\tsketch\timages/%s\t%.2f,%.2f\t%.2f,%.2f\n",
                          i, sname.c_str(), lx, ly, rx, ry);
            tsv << buf;
        }
    }
    tsv.close();
    return load_manifest(out_dir / "manifest.tsv");
}

}  // namespace psnet::toy
