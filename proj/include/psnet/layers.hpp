#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "psnet/gemm.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

inline int deconv_out_dim(int in, int k, int stride, int pad) {
    return (in - 1) * stride - 2 * pad + k;
}

// ---------------------------------------------------------------------------
// im2col / col2im for a single CHW sample
// ---------------------------------------------------------------------------

template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int stride, int pad, T* col, int Ho, int Wo) {
    const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* __restrict dst = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * P;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int hi = ho * stride - pad + ki;
                    T* __restrict row = dst + static_cast<std::size_t>(ho) * Wo;
                    if (hi < 0 || hi >= H) {
                        for (int wo = 0; wo < Wo; ++wo) row[wo] = T(0);
                        continue;
                    }
                    const T* __restrict src = x + (static_cast<std::size_t>(c) * H + hi) * W;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int wi = wo * stride - pad + kj;
                        row[wo] = (wi >= 0 && wi < W) ? src[wi] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int k, int stride, int pad, T* x, int Ho, int Wo) {
    const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* __restrict src = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * P;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int hi = ho * stride - pad + ki;
                    if (hi < 0 || hi >= H) continue;
                    T* __restrict dst = x + (static_cast<std::size_t>(c) * H + hi) * W;
                    const T* __restrict row = src + static_cast<std::size_t>(ho) * Wo;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int wi = wo * stride - pad + kj;
                        if (wi >= 0 && wi < W) dst[wi] += row[wo];
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
    Tensor<T> weight;  // (out_ch, in_ch*k*k)
    Tensor<T> bias;    // (out_ch)
    Tensor<T> wgrad, bgrad;

    struct Cache {
        Tensor<T> x;  // saved input (N,C,H,W)
        int Ho = 0, Wo = 0;
    };

    void init(int ic, int oc, int kk, int s, int p) {
        in_ch = ic;
        out_ch = oc;
        k = kk;
        stride = s;
        pad = p;
        weight = Tensor<T>({oc, ic * kk * kk});
        bias = Tensor<T>({oc});
        wgrad = Tensor<T>({oc, ic * kk * kk});
        bgrad = Tensor<T>({oc});
    }

    void init_weights(rng::Stream& rs) {
        // scaled normal, std = sqrt(2 / fan_in)
        const double std = std::sqrt(2.0 / (in_ch * k * k));
        for (std::int64_t i = 0; i < weight.numel(); ++i)
            weight[i] = static_cast<T>(rs.normal(0.0, std));
        bias.zero();
    }

    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        if (x.rank() != 4 || x.dim(1) != in_ch)
            throw ShapeError("Conv2d: bad input " + x.shape_string());
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int Ho = conv_out_dim(H, k, stride, pad), Wo = conv_out_dim(W, k, stride, pad);
        if (Ho <= 0 || Wo <= 0) throw ShapeError("Conv2d: input too small " + x.shape_string());
        c.x = x;
        c.Ho = Ho;
        c.Wo = Wo;
        const int K = in_ch * k * k;
        const std::int64_t P = static_cast<std::int64_t>(Ho) * Wo;
        Tensor<T> y({N, out_ch, Ho, Wo});
        std::vector<T> col(static_cast<std::size_t>(K) * P);
        for (int n = 0; n < N; ++n) {
            im2col(x.data() + n * static_cast<std::int64_t>(in_ch) * H * W, in_ch, H, W, k, stride,
                   pad, col.data(), Ho, Wo);
            T* yn = y.data() + n * static_cast<std::int64_t>(out_ch) * P;
            gemm_nn(out_ch, static_cast<int>(P), K, weight.data(), col.data(), yn, false);
            for (int oc = 0; oc < out_ch; ++oc) {
                const T b = bias[oc];
                T* __restrict row = yn + oc * P;
                for (std::int64_t j = 0; j < P; ++j) row[j] += b;
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, const Cache& c) {
        const int N = c.x.dim(0), H = c.x.dim(2), W = c.x.dim(3);
        const int Ho = c.Ho, Wo = c.Wo;
        const int K = in_ch * k * k;
        const std::int64_t P = static_cast<std::int64_t>(Ho) * Wo;
        Tensor<T> gx({N, in_ch, H, W});
        std::vector<T> col(static_cast<std::size_t>(K) * P);
        std::vector<T> gcol(static_cast<std::size_t>(K) * P);
        for (int n = 0; n < N; ++n) {
            const T* gyn = gy.data() + n * static_cast<std::int64_t>(out_ch) * P;
            im2col(c.x.data() + n * static_cast<std::int64_t>(in_ch) * H * W, in_ch, H, W, k,
                   stride, pad, col.data(), Ho, Wo);
            gemm_nt(out_ch, K, static_cast<int>(P), gyn, col.data(), wgrad.data(), true);
            for (int oc = 0; oc < out_ch; ++oc) {
                const T* __restrict row = gyn + oc * P;
                T acc = 0;
                for (std::int64_t j = 0; j < P; ++j) acc += row[j];
                bgrad[oc] += acc;
            }
            gemm_tn(K, static_cast<int>(P), out_ch, weight.data(), gyn, gcol.data(), false);
            col2im_add(gcol.data(), in_ch, H, W, k, stride, pad,
                       gx.data() + n * static_cast<std::int64_t>(in_ch) * H * W, Ho, Wo);
        }
        return gx;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight, &wgrad});
        out.push_back({prefix + ".bias", &bias, &bgrad});
    }
};

// ---------------------------------------------------------------------------
// ConvTranspose2d (deconvolution). Forward is the adjoint of Conv2d.
// ---------------------------------------------------------------------------

template <typename T>
struct ConvTranspose2d {
    int in_ch = 0, out_ch = 0, k = 4, stride = 2, pad = 1;
    Tensor<T> weight;  // (in_ch, out_ch*k*k)
    Tensor<T> bias;    // (out_ch)
    Tensor<T> wgrad, bgrad;

    struct Cache {
        Tensor<T> x;
        int Ho = 0, Wo = 0;  // output dims
    };

    void init(int ic, int oc, int kk, int s, int p) {
        in_ch = ic;
        out_ch = oc;
        k = kk;
        stride = s;
        pad = p;
        weight = Tensor<T>({ic, oc * kk * kk});
        bias = Tensor<T>({oc});
        wgrad = Tensor<T>({ic, oc * kk * kk});
        bgrad = Tensor<T>({oc});
    }

    void init_weights(rng::Stream& rs) {
        const double std = std::sqrt(2.0 / (in_ch * k * k));
        for (std::int64_t i = 0; i < weight.numel(); ++i)
            weight[i] = static_cast<T>(rs.normal(0.0, std));
        bias.zero();
    }

    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        if (x.rank() != 4 || x.dim(1) != in_ch)
            throw ShapeError("ConvTranspose2d: bad input " + x.shape_string());
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int Ho = deconv_out_dim(H, k, stride, pad), Wo = deconv_out_dim(W, k, stride, pad);
        if (Ho <= 0 || Wo <= 0)
            throw ShapeError("ConvTranspose2d: input too small " + x.shape_string());
        c.x = x;
        c.Ho = Ho;
        c.Wo = Wo;
        const int K = out_ch * k * k;
        const std::int64_t Pin = static_cast<std::int64_t>(H) * W;
        const std::int64_t Pout = static_cast<std::int64_t>(Ho) * Wo;
        Tensor<T> y({N, out_ch, Ho, Wo});
        std::vector<T> cols(static_cast<std::size_t>(K) * Pin);
        for (int n = 0; n < N; ++n) {
            const T* xn = x.data() + n * static_cast<std::int64_t>(in_ch) * Pin;
            gemm_tn(K, static_cast<int>(Pin), in_ch, weight.data(), xn, cols.data(), false);
            T* yn = y.data() + n * static_cast<std::int64_t>(out_ch) * Pout;
            col2im_add(cols.data(), out_ch, Ho, Wo, k, stride, pad, yn, H, W);
            for (int oc = 0; oc < out_ch; ++oc) {
                const T b = bias[oc];
                T* __restrict row = yn + oc * Pout;
                for (std::int64_t j = 0; j < Pout; ++j) row[j] += b;
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, const Cache& c) {
        const int N = c.x.dim(0), H = c.x.dim(2), W = c.x.dim(3);
        const int Ho = c.Ho, Wo = c.Wo;
        const int K = out_ch * k * k;
        const std::int64_t Pin = static_cast<std::int64_t>(H) * W;
        const std::int64_t Pout = static_cast<std::int64_t>(Ho) * Wo;
        Tensor<T> gx({N, in_ch, H, W});
        std::vector<T> gcols(static_cast<std::size_t>(K) * Pin);
        for (int n = 0; n < N; ++n) {
            const T* gyn = gy.data() + n * static_cast<std::int64_t>(out_ch) * Pout;
            im2col(gyn, out_ch, Ho, Wo, k, stride, pad, gcols.data(), H, W);
            const T* xn = c.x.data() + n * static_cast<std::int64_t>(in_ch) * Pin;
            // dW(in_ch, K) += x (in_ch, Pin) * gcols(K, Pin)^T
            gemm_nt(in_ch, K, static_cast<int>(Pin), xn, gcols.data(), wgrad.data(), true);
            for (int oc = 0; oc < out_ch; ++oc) {
                const T* __restrict row = gyn + oc * Pout;
                T acc = 0;
                for (std::int64_t j = 0; j < Pout; ++j) acc += row[j];
                bgrad[oc] += acc;
            }
            // gx(in_ch, Pin) = W (in_ch, K) * gcols(K, Pin)
            gemm_nn(in_ch, static_cast<int>(Pin), K, weight.data(), gcols.data(),
                    gx.data() + n * static_cast<std::int64_t>(in_ch) * Pin, false);
        }
        return gx;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight, &wgrad});
        out.push_back({prefix + ".bias", &bias, &bgrad});
    }
};

// ---------------------------------------------------------------------------
// MaxPool2d, 2x2 stride 2
// ---------------------------------------------------------------------------

template <typename T>
struct MaxPool2d {
    struct Cache {
        std::vector<std::int64_t> argmax;  // flat input offsets, one per output cell
        std::vector<int> in_shape;
    };

    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        if (H % 2 || W % 2) throw ShapeError("MaxPool2d: odd spatial dims " + x.shape_string());
        const int Ho = H / 2, Wo = W / 2;
        Tensor<T> y({N, C, Ho, Wo});
        c.argmax.assign(static_cast<std::size_t>(y.numel()), 0);
        c.in_shape = x.shape();
        std::int64_t oi = 0;
        for (int n = 0; n < N; ++n)
            for (int ch = 0; ch < C; ++ch) {
                const T* plane = x.data() + (static_cast<std::int64_t>(n) * C + ch) * H * W;
                const std::int64_t base = (static_cast<std::int64_t>(n) * C + ch) * H * W;
                for (int ho = 0; ho < Ho; ++ho)
                    for (int wo = 0; wo < Wo; ++wo, ++oi) {
                        const int hi = ho * 2, wi = wo * 2;
                        std::int64_t best = static_cast<std::int64_t>(hi) * W + wi;
                        T bv = plane[best];
                        const std::int64_t cand[3] = {best + 1, best + W, best + W + 1};
                        for (std::int64_t cd : cand)
                            if (plane[cd] > bv) {
                                bv = plane[cd];
                                best = cd;
                            }
                        y[oi] = bv;
                        c.argmax[static_cast<std::size_t>(oi)] = base + best;
                    }
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, const Cache& c) const {
        Tensor<T> gx(c.in_shape);
        for (std::int64_t i = 0; i < gy.numel(); ++i)
            gx[c.argmax[static_cast<std::size_t>(i)]] += gy[i];
        return gx;
    }
};

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
    int in_dim = 0, out_dim = 0;
    Tensor<T> weight;  // (out, in)
    Tensor<T> bias;    // (out)
    Tensor<T> wgrad, bgrad;

    struct Cache {
        Tensor<T> x;  // (N, in)
    };

    void init(int in, int out) {
        in_dim = in;
        out_dim = out;
        weight = Tensor<T>({out, in});
        bias = Tensor<T>({out});
        wgrad = Tensor<T>({out, in});
        bgrad = Tensor<T>({out});
    }

    void init_weights(rng::Stream& rs) {
        const double std = std::sqrt(2.0 / in_dim);
        for (std::int64_t i = 0; i < weight.numel(); ++i)
            weight[i] = static_cast<T>(rs.normal(0.0, std));
        bias.zero();
    }

    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        if (x.rank() != 2 || x.dim(1) != in_dim)
            throw ShapeError("Linear: bad input " + x.shape_string());
        const int N = x.dim(0);
        c.x = x;
        Tensor<T> y({N, out_dim});
        gemm_nt(N, out_dim, in_dim, x.data(), weight.data(), y.data(), false);
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < out_dim; ++o) y.at(n, o) += bias[o];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, const Cache& c) {
        const int N = c.x.dim(0);
        // dW(out,in) += gy(N,out)^T * x(N,in)
        gemm_tn(out_dim, in_dim, N, gy.data(), c.x.data(), wgrad.data(), true);
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < out_dim; ++o) bgrad[o] += gy.at(n, o);
        Tensor<T> gx({N, in_dim});
        gemm_nn(N, in_dim, out_dim, gy.data(), weight.data(), gx.data(), false);
        return gx;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight, &wgrad});
        out.push_back({prefix + ".bias", &bias, &bgrad});
    }
};

// ---------------------------------------------------------------------------
// Per-sample per-channel normalization core shared by InstanceNorm and AdaIN.
// Normalizes over HW with biased variance and epsilon inside the sqrt.
// ---------------------------------------------------------------------------

template <typename T>
struct NormCache {
    Tensor<T> xhat;     // (N,C,H,W)
    Tensor<T> inv_std;  // (N,C)
};

template <typename T>
void normalize_chw(const Tensor<T>& x, T eps, NormCache<T>& c) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t HW = static_cast<std::int64_t>(H) * W;
    c.xhat = Tensor<T>({N, C, H, W});
    c.inv_std = Tensor<T>({N, C});
    for (int n = 0; n < N; ++n)
        for (int ch = 0; ch < C; ++ch) {
            const T* __restrict p = x.data() + (static_cast<std::int64_t>(n) * C + ch) * HW;
            T mean = 0;
            for (std::int64_t i = 0; i < HW; ++i) mean += p[i];
            mean /= static_cast<T>(HW);
            T var = 0;
            for (std::int64_t i = 0; i < HW; ++i) {
                const T d = p[i] - mean;
                var += d * d;
            }
            var /= static_cast<T>(HW);
            const T istd = T(1) / std::sqrt(var + eps);
            c.inv_std.at(n, ch) = istd;
            T* __restrict q = c.xhat.data() + (static_cast<std::int64_t>(n) * C + ch) * HW;
            for (std::int64_t i = 0; i < HW; ++i) q[i] = (p[i] - mean) * istd;
        }
}

// Given upstream gradient dxhat, produce dx for the normalization above.
template <typename T>
void normalize_chw_backward(const Tensor<T>& dxhat, const NormCache<T>& c, Tensor<T>& gx) {
    const int N = dxhat.dim(0), C = dxhat.dim(1), H = dxhat.dim(2), W = dxhat.dim(3);
    const std::int64_t HW = static_cast<std::int64_t>(H) * W;
    gx = Tensor<T>({N, C, H, W});
    for (int n = 0; n < N; ++n)
        for (int ch = 0; ch < C; ++ch) {
            const std::int64_t off = (static_cast<std::int64_t>(n) * C + ch) * HW;
            const T* __restrict dxh = dxhat.data() + off;
            const T* __restrict xh = c.xhat.data() + off;
            T* __restrict out = gx.data() + off;
            T m1 = 0, m2 = 0;  // mean(dxhat), mean(dxhat * xhat)
            for (std::int64_t i = 0; i < HW; ++i) {
                m1 += dxh[i];
                m2 += dxh[i] * xh[i];
            }
            m1 /= static_cast<T>(HW);
            m2 /= static_cast<T>(HW);
            const T istd = c.inv_std.at(n, ch);
            for (std::int64_t i = 0; i < HW; ++i)
                out[i] = istd * (dxh[i] - m1 - xh[i] * m2);
        }
}

// InstanceNorm2d with learned per-channel affine.
template <typename T>
struct InstanceNorm2d {
    int channels = 0;
    T eps = T(1e-5);
    Tensor<T> gamma, beta;
    Tensor<T> ggrad, bgrad;

    struct Cache {
        NormCache<T> norm;
    };

    void init(int C) {
        channels = C;
        gamma = Tensor<T>::full({C}, T(1));
        beta = Tensor<T>({C});
        ggrad = Tensor<T>({C});
        bgrad = Tensor<T>({C});
    }

    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        if (x.dim(1) != channels) throw ShapeError("InstanceNorm2d: channel mismatch");
        NormCache<T> nc;
        normalize_chw(x, eps, nc);
        const int N = x.dim(0), C = channels;
        const std::int64_t HW = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
        Tensor<T> y(x.shape());
        for (int n = 0; n < N; ++n)
            for (int ch = 0; ch < C; ++ch) {
                const T g = gamma[ch], b = beta[ch];
                const std::int64_t off = (static_cast<std::int64_t>(n) * C + ch) * HW;
                const T* __restrict xh = nc.xhat.data() + off;
                T* __restrict q = y.data() + off;
                for (std::int64_t i = 0; i < HW; ++i) q[i] = g * xh[i] + b;
            }
        c.norm = std::move(nc);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, const Cache& c) {
        const int N = gy.dim(0), C = channels;
        const std::int64_t HW = static_cast<std::int64_t>(gy.dim(2)) * gy.dim(3);
        Tensor<T> dxhat(gy.shape());
        for (int n = 0; n < N; ++n)
            for (int ch = 0; ch < C; ++ch) {
                const std::int64_t off = (static_cast<std::int64_t>(n) * C + ch) * HW;
                const T* __restrict g = gy.data() + off;
                const T* __restrict xh = c.norm.xhat.data() + off;
                T* __restrict d = dxhat.data() + off;
                const T gm = gamma[ch];
                T sg = 0, sb = 0;
                for (std::int64_t i = 0; i < HW; ++i) {
                    sg += g[i] * xh[i];
                    sb += g[i];
                    d[i] = g[i] * gm;
                }
                ggrad[ch] += sg;
                bgrad[ch] += sb;
            }
        Tensor<T> gx;
        normalize_chw_backward(dxhat, c.norm, gx);
        return gx;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".gamma", &gamma, &ggrad});
        out.push_back({prefix + ".beta", &beta, &bgrad});
    }
};

// Adaptive instance normalization: style supplies per-sample per-channel
// scale and bias. y = scale * (x - mean)/std + bias.
template <typename T>
struct AdaIN {
    T eps = T(1e-5);

    struct Cache {
        NormCache<T> norm;
        Tensor<T> scale;  // (N,C)
    };

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& bias,
                      Cache& c) const {
        const int N = x.dim(0), C = x.dim(1);
        require_shape(scale, {N, C}, "AdaIN scale");
        require_shape(bias, {N, C}, "AdaIN bias");
        normalize_chw(x, eps, c.norm);
        c.scale = scale;
        const std::int64_t HW = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
        Tensor<T> y(x.shape());
        for (int n = 0; n < N; ++n)
            for (int ch = 0; ch < C; ++ch) {
                const T s = scale.at(n, ch), b = bias.at(n, ch);
                const std::int64_t off = (static_cast<std::int64_t>(n) * C + ch) * HW;
                const T* __restrict xh = c.norm.xhat.data() + off;
                T* __restrict q = y.data() + off;
                for (std::int64_t i = 0; i < HW; ++i) q[i] = s * xh[i] + b;
            }
        return y;
    }

    // Returns gx; writes gradient w.r.t. scale and bias.
    Tensor<T> backward(const Tensor<T>& gy, const Cache& c, Tensor<T>& gscale,
                       Tensor<T>& gbias) const {
        const int N = gy.dim(0), C = gy.dim(1);
        const std::int64_t HW = static_cast<std::int64_t>(gy.dim(2)) * gy.dim(3);
        gscale = Tensor<T>({N, C});
        gbias = Tensor<T>({N, C});
        Tensor<T> dxhat(gy.shape());
        for (int n = 0; n < N; ++n)
            for (int ch = 0; ch < C; ++ch) {
                const std::int64_t off = (static_cast<std::int64_t>(n) * C + ch) * HW;
                const T* __restrict g = gy.data() + off;
                const T* __restrict xh = c.norm.xhat.data() + off;
                T* __restrict d = dxhat.data() + off;
                const T s = c.scale.at(n, ch);
                T sg = 0, sb = 0;
                for (std::int64_t i = 0; i < HW; ++i) {
                    sg += g[i] * xh[i];
                    sb += g[i];
                    d[i] = g[i] * s;
                }
                gscale.at(n, ch) = sg;
                gbias.at(n, ch) = sb;
            }
        Tensor<T> gx;
        normalize_chw_backward(dxhat, c.norm, gx);
        return gx;
    }
};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
struct LeakyReLU {
    T slope = T(0.2);

    struct Cache {
        Tensor<T> x;
    };

    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        c.x = x;
        Tensor<T> y(x.shape());
        const std::int64_t n = x.numel();
        for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, const Cache& c) const {
        Tensor<T> gx(gy.shape());
        const std::int64_t n = gy.numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] = c.x[i] > T(0) ? gy[i] : slope * gy[i];
        return gx;
    }
};

template <typename T>
struct Softplus {
    struct Cache {
        Tensor<T> x;
    };

    static T eval(T x) {
        return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }

    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        c.x = x;
        Tensor<T> y(x.shape());
        const std::int64_t n = x.numel();
        for (std::int64_t i = 0; i < n; ++i) y[i] = eval(x[i]);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, const Cache& c) const {
        Tensor<T> gx(gy.shape());
        const std::int64_t n = gy.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            const T s = T(1) / (T(1) + std::exp(-c.x[i]));  // sigmoid
            gx[i] = gy[i] * s;
        }
        return gx;
    }
};

template <typename T>
struct Tanh {
    struct Cache {
        Tensor<T> y;
    };

    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        Tensor<T> y(x.shape());
        const std::int64_t n = x.numel();
        for (std::int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
        c.y = y;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, const Cache& c) const {
        Tensor<T> gx(gy.shape());
        const std::int64_t n = gy.numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] = gy[i] * (T(1) - c.y[i] * c.y[i]);
        return gx;
    }
};

}  // namespace psnet
