#pragma once

#include <array>
#include <string>
#include <vector>

#include "psnet/layers.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// 70x70-receptive-field patch discriminator over a channel-concatenated
// (conditioning, candidate) image pair. Kernel 4 throughout; strides
// 2,2,2,1,1; instance norm after the middle three convolutions; logits out.
template <typename T>
struct PatchDiscriminator {
    static constexpr int kLayers = 5;
    static constexpr std::array<int, kLayers> kStrides{2, 2, 2, 1, 1};
    static constexpr int kKernel = 4;

    int in_channels = 0;
    int base_channels = 64;
    int pad = 1;

    std::vector<Conv2d<T>> convs;
    std::vector<InstanceNorm2d<T>> norms;  // for convs 1..3
    LeakyReLU<T> act{T(0.2)};

    struct Cache {
        std::vector<typename Conv2d<T>::Cache> conv;
        std::vector<typename InstanceNorm2d<T>::Cache> norm;
        std::vector<typename LeakyReLU<T>::Cache> act;
    };

    static constexpr int receptive_field() {
        int rf = 1, jump = 1;
        for (int s : kStrides) {
            rf += (kKernel - 1) * jump;
            jump *= s;
        }
        return rf;
    }

    static int output_side(int input_side, int padding) {
        int s = input_side;
        for (int stride : kStrides) s = conv_out_dim(s, kKernel, stride, padding);
        return s;
    }

    void init(int in_ch, int base_ch, int padding) {
        in_channels = in_ch;
        base_channels = base_ch;
        pad = padding;
        convs.resize(kLayers);
        norms.resize(3);
        const int chans[kLayers + 1] = {in_ch, base_ch, base_ch * 2, base_ch * 4, base_ch * 8, 1};
        for (int i = 0; i < kLayers; ++i)
            convs[static_cast<std::size_t>(i)].init(chans[i], chans[i + 1], kKernel, kStrides[static_cast<std::size_t>(i)], pad);
        for (int i = 0; i < 3; ++i) norms[static_cast<std::size_t>(i)].init(chans[i + 2]);
    }

    void init_weights(rng::Stream& rs) {
        for (auto& c : convs) c.init_weights(rs);
    }

    // (N, in_channels, S, S) -> (N, 1, s, s) logit map
    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        if (x.rank() != 4 || x.dim(1) != in_channels)
            throw ShapeError("discriminator: expected (N," + std::to_string(in_channels) +
                             ",S,S), got " + x.shape_string());
        if (x.dim(2) != x.dim(3)) throw ShapeError("discriminator: non-square input");
        c.conv.resize(kLayers);
        c.norm.resize(3);
        c.act.resize(kLayers - 1);
        Tensor<T> h = x;
        for (int i = 0; i < kLayers; ++i) {
            const std::size_t u = static_cast<std::size_t>(i);
            h = convs[u].forward(h, c.conv[u]);
            if (i >= 1 && i <= 3) h = norms[u - 1].forward(h, c.norm[u - 1]);
            if (i < kLayers - 1) h = act.forward(h, c.act[u]);
        }
        return h;
    }

    Tensor<T> backward(const Tensor<T>& gy, Cache& c) {
        Tensor<T> g = gy;
        for (int i = kLayers - 1; i >= 0; --i) {
            const std::size_t u = static_cast<std::size_t>(i);
            if (i < kLayers - 1) g = act.backward(g, c.act[u]);
            if (i >= 1 && i <= 3) g = norms[u - 1].backward(g, c.norm[u - 1]);
            g = convs[u].backward(g, c.conv[u]);
        }
        return g;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].collect(out, prefix + ".conv" + std::to_string(i));
        for (std::size_t i = 0; i < norms.size(); ++i)
            norms[i].collect(out, prefix + ".norm" + std::to_string(i));
    }
};

// Concatenates two equal-size image batches along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3))
        throw ShapeError("concat: incompatible shapes " + a.shape_string() + " vs " +
                         b.shape_string());
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    const std::int64_t HW = static_cast<std::int64_t>(H) * W;
    Tensor<T> out({N, Ca + Cb, H, W});
    for (int n = 0; n < N; ++n) {
        T* dst = out.data() + static_cast<std::int64_t>(n) * (Ca + Cb) * HW;
        const T* pa = a.data() + static_cast<std::int64_t>(n) * Ca * HW;
        const T* pb = b.data() + static_cast<std::int64_t>(n) * Cb * HW;
        for (std::int64_t i = 0; i < Ca * HW; ++i) dst[i] = pa[i];
        for (std::int64_t i = 0; i < Cb * HW; ++i) dst[Ca * HW + i] = pb[i];
    }
    return out;
}

// Splits a channel-concat gradient back into the two operand gradients.
template <typename T>
void split_channels(const Tensor<T>& g, int ca, Tensor<T>& ga, Tensor<T>& gb) {
    const int N = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
    const int cb = C - ca;
    const std::int64_t HW = static_cast<std::int64_t>(H) * W;
    ga = Tensor<T>({N, ca, H, W});
    gb = Tensor<T>({N, cb, H, W});
    for (int n = 0; n < N; ++n) {
        const T* src = g.data() + static_cast<std::int64_t>(n) * C * HW;
        T* pa = ga.data() + static_cast<std::int64_t>(n) * ca * HW;
        T* pb = gb.data() + static_cast<std::int64_t>(n) * cb * HW;
        for (std::int64_t i = 0; i < ca * HW; ++i) pa[i] = src[i];
        for (std::int64_t i = 0; i < cb * HW; ++i) pb[i] = src[ca * HW + i];
    }
}

}  // namespace psnet
