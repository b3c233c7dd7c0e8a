#pragma once

// Test-side reference implementations, written independently of the library
// code paths they check: direct-loop convolution arithmetic, naive matrix
// products, and a central finite-difference gradient probe.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace oracles {

using psnet::Tensor;

inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_err(const Tensor<double>& a, const Tensor<double>& b,
                          double floor = 1e-6) {
    double worst = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, rel_err(a[i], b[i], floor));
    return worst;
}

// Central finite differences of a scalar functional w.r.t. every element of
// `param`. The functional must re-run the full forward pass on each call.
template <class F>
Tensor<double> fd_gradient(Tensor<double>& param, F loss_fn, double h = 1e-6) {
    Tensor<double> g(param.shape());
    for (std::int64_t i = 0; i < param.numel(); ++i) {
        const double orig = param[i];
        const double step = h * std::max(1.0, std::abs(orig));
        param[i] = orig + step;
        const double up = loss_fn();
        param[i] = orig - step;
        const double down = loss_fn();
        param[i] = orig;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

// Same, probing only the given flat indices; untouched entries get the
// analytic value so comparisons stay element-aligned.
template <class F>
Tensor<double> fd_gradient_at(Tensor<double>& param, const std::vector<std::int64_t>& idx,
                              const Tensor<double>& analytic, F loss_fn, double h = 1e-6) {
    Tensor<double> g = analytic;
    for (std::int64_t i : idx) {
        const double orig = param[i];
        const double step = h * std::max(1.0, std::abs(orig));
        param[i] = orig + step;
        const double up = loss_fn();
        param[i] = orig - step;
        const double down = loss_fn();
        param[i] = orig;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

inline void naive_gemm(int m, int n, int k, const double* A, const double* B, double* C,
                       bool ta, bool tb) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0;
            for (int p = 0; p < k; ++p) {
                const double a = ta ? A[static_cast<std::int64_t>(p) * m + i]
                                    : A[static_cast<std::int64_t>(i) * k + p];
                const double b = tb ? B[static_cast<std::int64_t>(j) * k + p]
                                    : B[static_cast<std::int64_t>(p) * n + j];
                acc += a * b;
            }
            C[static_cast<std::int64_t>(i) * n + j] = acc;
        }
}

inline int ref_conv_out(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

// Direct-loop convolution; weight layout (oc, ic, ki, kj) flattened.
inline Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& w,
                                   const Tensor<double>& b, int k, int s, int p) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int OC = w.dim(0);
    const int Ho = ref_conv_out(H, k, s, p), Wo = ref_conv_out(W, k, s, p);
    Tensor<double> y({N, OC, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < OC; ++oc)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    double acc = b[oc];
                    for (int ic = 0; ic < C; ++ic)
                        for (int ki = 0; ki < k; ++ki)
                            for (int kj = 0; kj < k; ++kj) {
                                const int hi = ho * s - p + ki;
                                const int wi = wo * s - p + kj;
                                if (hi < 0 || hi >= H || wi < 0 || wi >= W) continue;
                                acc += x.at(n, ic, hi, wi) *
                                       w[((static_cast<std::int64_t>(oc) * C + ic) * k + ki) * k +
                                         kj];
                            }
                    y.at(n, oc, ho, wo) = acc;
                }
    return y;
}

// Direct scatter-loop transposed convolution; weight layout (ic, oc, ki, kj).
inline Tensor<double> naive_deconv2d(const Tensor<double>& x, const Tensor<double>& w,
                                     const Tensor<double>& b, int oc_count, int k, int s, int p) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = (H - 1) * s - 2 * p + k;
    const int Wo = (W - 1) * s - 2 * p + k;
    Tensor<double> y({N, oc_count, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < oc_count; ++oc)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) y.at(n, oc, ho, wo) = b[oc];
    for (int n = 0; n < N; ++n)
        for (int ic = 0; ic < C; ++ic)
            for (int hi = 0; hi < H; ++hi)
                for (int wi = 0; wi < W; ++wi) {
                    const double xv = x.at(n, ic, hi, wi);
                    for (int oc = 0; oc < oc_count; ++oc)
                        for (int ki = 0; ki < k; ++ki)
                            for (int kj = 0; kj < k; ++kj) {
                                const int ho = hi * s - p + ki;
                                const int wo = wi * s - p + kj;
                                if (ho < 0 || ho >= Ho || wo < 0 || wo >= Wo) continue;
                                y.at(n, oc, ho, wo) +=
                                    xv * w[((static_cast<std::int64_t>(ic) * oc_count + oc) * k +
                                            ki) * k +
                                           kj];
                            }
                }
    return y;
}

inline void fill_normal(Tensor<double>& t, psnet::rng::Stream& rs, double std = 1.0) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rs.normal(0.0, std);
}

}  // namespace oracles
