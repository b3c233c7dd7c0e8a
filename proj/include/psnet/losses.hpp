#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "psnet/errors.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// ---------------------------------------------------------------------------
// Loss weighting for the joint objective
// L = L_id + lambda_gan * L_gan + lambda_s * L_s + lambda_w * L_w
// ---------------------------------------------------------------------------

template <typename T>
struct LossWeights {
    T lambda_gan = T(1);
    T lambda_s = T(10);
    T lambda_w = T(1);

    void validate() const {
        if (lambda_gan < T(0) || lambda_s < T(0) || lambda_w < T(0))
            throw ConfigError("loss weights must be nonnegative");
    }
};

template <typename T>
struct LossParts {
    T adacos = T(0);
    T gan = T(0);
    T similarity = T(0);
    T latent = T(0);
};

template <typename T>
T joint_loss(const LossParts<T>& p, const LossWeights<T>& w) {
    const T total =
        p.adacos + w.lambda_gan * p.gan + w.lambda_s * p.similarity + w.lambda_w * p.latent;
    if (!std::isfinite(total)) throw NumericError("joint loss is not finite");
    return total;
}

// ---------------------------------------------------------------------------
// Mean l1
// ---------------------------------------------------------------------------

// Mean absolute difference. Optional gradients w.r.t. a and b; upstream
// scalar gradient gy multiplies both.
template <typename T>
T l1_mean(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>* ga = nullptr,
          Tensor<T>* gb = nullptr, T gy = T(1)) {
    require_same_shape(a, b, "l1");
    const std::int64_t n = a.numel();
    if (ga) *ga = Tensor<T>(a.shape());
    if (gb) *gb = Tensor<T>(a.shape());
    const T inv = gy / static_cast<T>(n);
    T acc = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const T d = a[i] - b[i];
        acc += std::abs(d);
        const T s = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
        if (ga) (*ga)[i] = s;
        if (gb) (*gb)[i] = -s;
    }
    return acc / static_cast<T>(n);
}

// Latent-code agreement across modalities: mean l1, symmetric.
template <typename T>
T collaborative_loss(const Tensor<T>& wp, const Tensor<T>& ws, Tensor<T>* gwp = nullptr,
                     Tensor<T>* gws = nullptr, T gy = T(1)) {
    return l1_mean(wp, ws, gwp, gws, gy);
}

// ---------------------------------------------------------------------------
// SSIM with an 11-tap Gaussian window (sigma 1.5), valid positions only.
// Stabilizers follow the usual (k1 L)^2 / (k2 L)^2 with the dynamic range
// L = 2 of [-1, 1] images.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr int kSsimWindow = 11;

template <typename T>
const std::vector<T>& ssim_kernel() {
    static const std::vector<T> k = [] {
        std::vector<T> v(kSsimWindow);
        const double sigma = 1.5;
        double sum = 0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - (kSsimWindow - 1) / 2.0;
            const double g = std::exp(-d * d / (2.0 * sigma * sigma));
            v[static_cast<std::size_t>(i)] = static_cast<T>(g);
            sum += g;
        }
        for (auto& x : v) x = static_cast<T>(static_cast<double>(x) / sum);
        return v;
    }();
    return k;
}

// Valid separable correlation of an H x W plane: rows then columns.
template <typename T>
void valid_corr(const T* src, int H, int W, T* dst, T* tmp) {
    const auto& k = ssim_kernel<T>();
    const int Wv = W - kSsimWindow + 1;
    const int Hv = H - kSsimWindow + 1;
    for (int i = 0; i < H; ++i) {
        const T* __restrict row = src + static_cast<std::int64_t>(i) * W;
        T* __restrict out = tmp + static_cast<std::int64_t>(i) * Wv;
        for (int j = 0; j < Wv; ++j) {
            T acc = 0;
            for (int u = 0; u < kSsimWindow; ++u) acc += k[static_cast<std::size_t>(u)] * row[j + u];
            out[j] = acc;
        }
    }
    for (int i = 0; i < Hv; ++i)
        for (int j = 0; j < Wv; ++j) {
            T acc = 0;
            for (int u = 0; u < kSsimWindow; ++u)
                acc += k[static_cast<std::size_t>(u)] * tmp[static_cast<std::int64_t>(i + u) * Wv + j];
            dst[static_cast<std::int64_t>(i) * Wv + j] = acc;
        }
}

// Adjoint of valid_corr: scatter an Hv x Wv gradient back to H x W.
template <typename T>
void valid_corr_adjoint(const T* g, int H, int W, T* dst, T* tmp) {
    const auto& k = ssim_kernel<T>();
    const int Wv = W - kSsimWindow + 1;
    const int Hv = H - kSsimWindow + 1;
    std::fill(tmp, tmp + static_cast<std::int64_t>(H) * Wv, T(0));
    for (int i = 0; i < Hv; ++i)
        for (int u = 0; u < kSsimWindow; ++u) {
            const T kv = k[static_cast<std::size_t>(u)];
            T* __restrict out = tmp + static_cast<std::int64_t>(i + u) * Wv;
            const T* __restrict in = g + static_cast<std::int64_t>(i) * Wv;
            for (int j = 0; j < Wv; ++j) out[j] += kv * in[j];
        }
    std::fill(dst, dst + static_cast<std::int64_t>(H) * W, T(0));
    for (int i = 0; i < H; ++i) {
        const T* __restrict in = tmp + static_cast<std::int64_t>(i) * Wv;
        T* __restrict out = dst + static_cast<std::int64_t>(i) * W;
        for (int j = 0; j < Wv; ++j) {
            const T v = in[j];
            for (int u = 0; u < kSsimWindow; ++u) out[j + u] += k[static_cast<std::size_t>(u)] * v;
        }
    }
}

}  // namespace detail

// Mean SSIM index over all valid window positions, channels and samples.
// If gx is non-null it receives d(index)/dx scaled by gy (y held constant).
template <typename T>
T ssim_index(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>* gx = nullptr, T gy = T(1)) {
    require_same_shape(x, y, "ssim");
    if (x.rank() != 4) throw ShapeError("ssim: expected NCHW, got " + x.shape_string());
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    constexpr int win = detail::kSsimWindow;
    if (H < win || W < win)
        throw ShapeError("ssim: image smaller than window " + x.shape_string());
    const T c1 = T(0.0004);  // (0.01 * 2)^2
    const T c2 = T(0.0036);  // (0.03 * 2)^2
    const int Hv = H - win + 1, Wv = W - win + 1;
    const std::int64_t HW = static_cast<std::int64_t>(H) * W;
    const std::int64_t V = static_cast<std::int64_t>(Hv) * Wv;
    const std::int64_t planes = static_cast<std::int64_t>(N) * C;

    if (gx) *gx = Tensor<T>(x.shape());
    std::vector<T> xx(static_cast<std::size_t>(HW)), yy(static_cast<std::size_t>(HW)),
        xy(static_cast<std::size_t>(HW));
    std::vector<T> mux(static_cast<std::size_t>(V)), muy(static_cast<std::size_t>(V)),
        sxx(static_cast<std::size_t>(V)), syy(static_cast<std::size_t>(V)),
        sxy(static_cast<std::size_t>(V));
    std::vector<T> dmux(static_cast<std::size_t>(V)), dsxx(static_cast<std::size_t>(V)),
        dsxy(static_cast<std::size_t>(V));
    std::vector<T> tmp(static_cast<std::size_t>(static_cast<std::int64_t>(H) * Wv));
    std::vector<T> scat(static_cast<std::size_t>(HW));

    T total = 0;
    const T norm = T(1) / static_cast<T>(planes * V);
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* px = x.data() + pl * HW;
        const T* py = y.data() + pl * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
            xx[static_cast<std::size_t>(i)] = px[i] * px[i];
            yy[static_cast<std::size_t>(i)] = py[i] * py[i];
            xy[static_cast<std::size_t>(i)] = px[i] * py[i];
        }
        detail::valid_corr(px, H, W, mux.data(), tmp.data());
        detail::valid_corr(py, H, W, muy.data(), tmp.data());
        detail::valid_corr(xx.data(), H, W, sxx.data(), tmp.data());
        detail::valid_corr(yy.data(), H, W, syy.data(), tmp.data());
        detail::valid_corr(xy.data(), H, W, sxy.data(), tmp.data());
        for (std::int64_t i = 0; i < V; ++i) {
            const std::size_t u = static_cast<std::size_t>(i);
            const T mx = mux[u], my = muy[u];
            const T vx = sxx[u] - mx * mx;
            const T vy = syy[u] - my * my;
            const T cv = sxy[u] - mx * my;
            const T a = T(2) * mx * my + c1;
            const T b = mx * mx + my * my + c1;
            const T cc = T(2) * cv + c2;
            const T d = vx + vy + c2;
            const T bd = b * d;
            const T ssim = (a * cc) / bd;
            total += ssim;
            if (gx) {
                const T dA = cc / bd;
                const T dB = -ssim / b;
                const T dC = a / bd;
                const T dD = -ssim / d;
                // mu_x feeds A, B directly and C, D through the centered moments.
                dmux[u] = (dA * T(2) * my + dB * T(2) * mx + dC * (-T(2) * my) +
                           dD * (-T(2) * mx)) *
                          norm * gy;
                dsxx[u] = dD * norm * gy;
                dsxy[u] = dC * T(2) * norm * gy;
            }
        }
        if (gx) {
            T* out = gx->data() + pl * HW;
            detail::valid_corr_adjoint(dmux.data(), H, W, out, tmp.data());
            detail::valid_corr_adjoint(dsxx.data(), H, W, scat.data(), tmp.data());
            for (std::int64_t i = 0; i < HW; ++i)
                out[i] += T(2) * px[i] * scat[static_cast<std::size_t>(i)];
            detail::valid_corr_adjoint(dsxy.data(), H, W, scat.data(), tmp.data());
            for (std::int64_t i = 0; i < HW; ++i)
                out[i] += py[i] * scat[static_cast<std::size_t>(i)];
        }
    }
    return total * norm;
}

// ---------------------------------------------------------------------------
// Image similarity term with selectable mode
// ---------------------------------------------------------------------------

enum class SimilarityMode { l1, ssim, l1_plus_ssim };

inline SimilarityMode parse_similarity_mode(const std::string& s) {
    if (s == "l1") return SimilarityMode::l1;
    if (s == "ssim") return SimilarityMode::ssim;
    if (s == "l1+ssim" || s == "l1_plus_ssim") return SimilarityMode::l1_plus_ssim;
    throw ConfigError("unknown similarity mode '" + s + "' (expected l1, ssim, l1+ssim)");
}

inline std::string similarity_mode_name(SimilarityMode m) {
    switch (m) {
        case SimilarityMode::l1: return "l1";
        case SimilarityMode::ssim: return "ssim";
        default: return "l1+ssim";
    }
}

// l1 -> mean absolute difference; ssim -> 1 - mean SSIM; l1+ssim -> sum.
// Optional gradient w.r.t. `generated` (target held constant).
template <typename T>
T similarity_loss(const Tensor<T>& generated, const Tensor<T>& target, SimilarityMode mode,
                  Tensor<T>* ggen = nullptr, T gy = T(1)) {
    require_same_shape(generated, target, "similarity");
    T loss = 0;
    if (mode == SimilarityMode::l1 || mode == SimilarityMode::l1_plus_ssim) {
        Tensor<T> g;
        loss += l1_mean(generated, target, ggen ? &g : nullptr, static_cast<Tensor<T>*>(nullptr),
                        gy);
        if (ggen) *ggen = std::move(g);
    } else if (ggen) {
        *ggen = Tensor<T>(generated.shape());
    }
    if (mode == SimilarityMode::ssim || mode == SimilarityMode::l1_plus_ssim) {
        Tensor<T> g;
        const T idx = ssim_index(generated, target, ggen ? &g : nullptr, -gy);
        loss += T(1) - idx;
        if (ggen) ggen->add(g);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Adversarial losses (binary cross-entropy with logits, patch-averaged)
// ---------------------------------------------------------------------------

// Stable elementwise BCE-with-logits against a constant target, mean-reduced.
// Optional gradient accumulation: *glogits += gy * d(loss)/d(logits).
template <typename T>
T bce_with_logits_mean(const Tensor<T>& logits, T target, Tensor<T>* glogits = nullptr,
                       T gy = T(1)) {
    const std::int64_t n = logits.numel();
    if (n == 0) throw ShapeError("bce: empty logit map");
    if (glogits && !glogits->same_shape(logits)) *glogits = Tensor<T>(logits.shape());
    T acc = 0;
    const T inv = gy / static_cast<T>(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const T z = logits[i];
        if (!std::isfinite(z)) throw NumericError("bce: non-finite logit");
        acc += std::max(z, T(0)) - target * z + std::log1p(std::exp(-std::abs(z)));
        if (glogits) {
            const T sig = T(1) / (T(1) + std::exp(-z));
            (*glogits)[i] += inv * (sig - target);
        }
    }
    return acc / static_cast<T>(n);
}

// Discriminator objective: real patches toward 1, fake patches toward 0.
template <typename T>
T gan_discriminator_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits,
                         Tensor<T>* greal = nullptr, Tensor<T>* gfake = nullptr, T gy = T(1)) {
    return bce_with_logits_mean(real_logits, T(1), greal, gy) +
           bce_with_logits_mean(fake_logits, T(0), gfake, gy);
}

// Non-saturating generator objective: fake patches toward 1.
template <typename T>
T gan_generator_loss(const Tensor<T>& fake_logits, Tensor<T>* gfake = nullptr, T gy = T(1)) {
    return bce_with_logits_mean(fake_logits, T(1), gfake, gy);
}

}  // namespace psnet
