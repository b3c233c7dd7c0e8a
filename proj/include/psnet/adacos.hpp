#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "psnet/layers.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// Cosine-margin-free classification head with an adaptive logit scale.
// Weight rows and input features are L2-normalized; logits are
// scale * cos(theta). The scale is either fixed or updated from batch
// statistics before each loss evaluation, and is a constant in backward.
template <typename T>
struct AdaCosHead {
    int num_classes = 0;
    int dim = 0;
    bool dynamic = true;
    T scale = T(0);
    Tensor<T> weight;  // (C, d)
    Tensor<T> wgrad;

    static double fixed_scale(int num_classes) {
        // sqrt(2) * ln(C - 1); clamped below so tiny class counts keep a
        // positive scale.
        const int c = std::max(num_classes - 1, 2);
        return std::numbers::sqrt2 * std::log(static_cast<double>(c));
    }

    void init(int C, int d, bool dynamic_scale, rng::Stream& rs) {
        if (C < 2) throw ConfigError("AdaCosHead: needs at least 2 classes, got " +
                                     std::to_string(C));
        num_classes = C;
        dim = d;
        dynamic = dynamic_scale;
        scale = static_cast<T>(fixed_scale(C));
        weight = Tensor<T>({C, d});
        wgrad = Tensor<T>({C, d});
        for (std::int64_t i = 0; i < weight.numel(); ++i)
            weight[i] = static_cast<T>(rs.normal(0.0, 1.0));
        renormalize_rows();
    }

    void renormalize_rows() {
        for (int c = 0; c < num_classes; ++c) {
            T* row = weight.data() + static_cast<std::int64_t>(c) * dim;
            T n2 = 0;
            for (int j = 0; j < dim; ++j) n2 += row[j] * row[j];
            const T inv = T(1) / std::sqrt(std::max(n2, T(1e-24)));
            for (int j = 0; j < dim; ++j) row[j] *= inv;
        }
    }

    struct Cache {
        Tensor<T> fhat;    // (N, d) normalized features
        Tensor<T> fnorm;   // (N) feature norms
        Tensor<T> what;    // (C, d) normalized weight rows
        Tensor<T> wnorm;   // (C)
        Tensor<T> prob;    // (N, C) softmax probabilities
        std::vector<int> labels;
        T scale_used = T(0);
    };

    // Updates the dynamic scale from this batch (before the loss), then
    // returns mean cross-entropy over scale*cos(theta) logits.
    T forward(const Tensor<T>& feat, const std::vector<int>& labels, Cache& c) {
        if (feat.rank() != 2 || feat.dim(1) != dim)
            throw ShapeError("AdaCosHead: bad feature shape " + feat.shape_string());
        const int N = feat.dim(0);
        if (static_cast<int>(labels.size()) != N)
            throw ShapeError("AdaCosHead: label count mismatch");
        for (int y : labels)
            if (y < 0 || y >= num_classes) throw DataError("AdaCosHead: label out of range");

        c.fhat = Tensor<T>({N, dim});
        c.fnorm = Tensor<T>({N});
        for (int i = 0; i < N; ++i) {
            const T* row = feat.data() + static_cast<std::int64_t>(i) * dim;
            T n2 = 0;
            for (int j = 0; j < dim; ++j) n2 += row[j] * row[j];
            if (!(n2 > T(0)) || !std::isfinite(n2))
                throw NumericError("AdaCosHead: zero-norm or non-finite feature");
            const T nrm = std::sqrt(n2);
            c.fnorm[i] = nrm;
            T* dst = c.fhat.data() + static_cast<std::int64_t>(i) * dim;
            for (int j = 0; j < dim; ++j) dst[j] = row[j] / nrm;
        }
        c.what = Tensor<T>({num_classes, dim});
        c.wnorm = Tensor<T>({num_classes});
        for (int k = 0; k < num_classes; ++k) {
            const T* row = weight.data() + static_cast<std::int64_t>(k) * dim;
            T n2 = 0;
            for (int j = 0; j < dim; ++j) n2 += row[j] * row[j];
            const T nrm = std::sqrt(std::max(n2, T(1e-24)));
            c.wnorm[k] = nrm;
            T* dst = c.what.data() + static_cast<std::int64_t>(k) * dim;
            for (int j = 0; j < dim; ++j) dst[j] = row[j] / nrm;
        }

        Tensor<T> cosine({N, num_classes});
        gemm_nt(N, num_classes, dim, c.fhat.data(), c.what.data(), cosine.data(), false);

        if (dynamic) {
            // B_avg averages the non-true-class exponentials at the previous
            // scale; theta_med is the batch median of true-class angles.
            const double s_old = static_cast<double>(scale);
            double b_sum = 0;
            std::vector<double> theta(N);
            for (int i = 0; i < N; ++i) {
                for (int k = 0; k < num_classes; ++k)
                    if (k != labels[static_cast<std::size_t>(i)])
                        b_sum += std::exp(s_old * static_cast<double>(cosine.at(i, k)));
                const double cy = std::clamp(
                    static_cast<double>(cosine.at(i, labels[static_cast<std::size_t>(i)])), -1.0,
                    1.0);
                theta[static_cast<std::size_t>(i)] = std::acos(cy);
            }
            const double b_avg = b_sum / N;
            std::sort(theta.begin(), theta.end());
            const double theta_med =
                (N % 2) ? theta[static_cast<std::size_t>(N / 2)]
                        : 0.5 * (theta[static_cast<std::size_t>(N / 2 - 1)] +
                                 theta[static_cast<std::size_t>(N / 2)]);
            if (b_avg > 1.0) {
                const double denom = std::cos(std::min(std::numbers::pi / 4.0, theta_med));
                // Clamped above by the fixed-mode value so the scale stays in
                // (0, s_max] regardless of batch statistics.
                scale = static_cast<T>(std::min(std::log(b_avg) / denom, fixed_scale(num_classes)));
            }
        }

        const T s = scale;
        c.scale_used = s;
        c.labels = labels;
        c.prob = Tensor<T>({N, num_classes});
        T loss = 0;
        for (int i = 0; i < N; ++i) {
            T mx = -std::numeric_limits<T>::infinity();
            for (int k = 0; k < num_classes; ++k) mx = std::max(mx, s * cosine.at(i, k));
            T denom = 0;
            for (int k = 0; k < num_classes; ++k) {
                const T e = std::exp(s * cosine.at(i, k) - mx);
                c.prob.at(i, k) = e;
                denom += e;
            }
            for (int k = 0; k < num_classes; ++k) c.prob.at(i, k) /= denom;
            loss -= std::log(c.prob.at(i, labels[static_cast<std::size_t>(i)]));
        }
        return loss / static_cast<T>(N);
    }

    // Returns dL/dfeat and accumulates dL/dweight, with gradients routed
    // through both normalizations.
    Tensor<T> backward(const Cache& c) {
        const int N = c.fhat.dim(0);
        const T s = c.scale_used;
        Tensor<T> dz = c.prob;  // (N, C)
        for (int i = 0; i < N; ++i) dz.at(i, c.labels[static_cast<std::size_t>(i)]) -= T(1);
        const T coef = s / static_cast<T>(N);
        dz.scale(coef);

        // dL/dfhat = dz * what; dL/dwhat = dz^T * fhat
        Tensor<T> dfhat({N, dim});
        gemm_nn(N, dim, num_classes, dz.data(), c.what.data(), dfhat.data(), false);
        Tensor<T> dwhat({num_classes, dim});
        gemm_tn(num_classes, dim, N, dz.data(), c.fhat.data(), dwhat.data(), false);

        Tensor<T> gfeat({N, dim});
        for (int i = 0; i < N; ++i) {
            const T* fh = c.fhat.data() + static_cast<std::int64_t>(i) * dim;
            const T* dfh = dfhat.data() + static_cast<std::int64_t>(i) * dim;
            T dot = 0;
            for (int j = 0; j < dim; ++j) dot += fh[j] * dfh[j];
            const T inv = T(1) / c.fnorm[i];
            T* out = gfeat.data() + static_cast<std::int64_t>(i) * dim;
            for (int j = 0; j < dim; ++j) out[j] = inv * (dfh[j] - dot * fh[j]);
        }
        for (int k = 0; k < num_classes; ++k) {
            const T* wh = c.what.data() + static_cast<std::int64_t>(k) * dim;
            const T* dwh = dwhat.data() + static_cast<std::int64_t>(k) * dim;
            T dot = 0;
            for (int j = 0; j < dim; ++j) dot += wh[j] * dwh[j];
            const T inv = T(1) / c.wnorm[k];
            T* out = wgrad.data() + static_cast<std::int64_t>(k) * dim;
            for (int j = 0; j < dim; ++j) out[j] += inv * (dwh[j] - dot * wh[j]);
        }
        return gfeat;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight, &wgrad});
    }
};

}  // namespace psnet
