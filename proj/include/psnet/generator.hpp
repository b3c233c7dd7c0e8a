#pragma once

#include <string>
#include <vector>

#include "psnet/layers.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

enum class GeneratorActivation { softplus, leaky };

inline GeneratorActivation parse_generator_activation(const std::string& s) {
    if (s == "softplus") return GeneratorActivation::softplus;
    if (s == "leaky") return GeneratorActivation::leaky;
    throw ConfigError("unknown generator activation '" + s + "' (expected softplus, leaky)");
}

inline std::string generator_activation_name(GeneratorActivation a) {
    return a == GeneratorActivation::softplus ? "softplus" : "leaky";
}

// Style generator G: latent code -> image. A learned constant input is
// upsampled by deconv blocks; every block is re-styled from w through a
// per-block affine that yields AdaIN scale and bias. No noise inputs, no
// progressive growing. Output through tanh.
template <typename T>
struct StyleGenerator {
    int latent_dim = 0;
    int out_channels = 3;
    int out_size = 0;
    int const_size = 4;
    int nblocks = 0;
    GeneratorActivation activation = GeneratorActivation::softplus;

    Tensor<T> const_input;  // (C0, const_size, const_size)
    Tensor<T> const_grad;
    std::vector<ConvTranspose2d<T>> deconvs;
    std::vector<Conv2d<T>> convs;
    std::vector<Linear<T>> styles;  // d -> 2 * block_channels
    AdaIN<T> adain;
    Conv2d<T> to_image;
    Tanh<T> out_act;
    LeakyReLU<T> leaky{T(0.2)};
    Softplus<T> softplus;

    struct Cache {
        std::vector<typename ConvTranspose2d<T>::Cache> deconv;
        std::vector<typename Conv2d<T>::Cache> conv;
        std::vector<typename Linear<T>::Cache> style;
        std::vector<typename AdaIN<T>::Cache> adain;
        std::vector<typename LeakyReLU<T>::Cache> lact;
        std::vector<typename Softplus<T>::Cache> sact;
        typename Conv2d<T>::Cache to_image;
        typename Tanh<T>::Cache out_act;
        Tensor<T> w;  // saved latent batch for style backward
    };

    static int block_channels(int base, int min_ch, int block) {
        int c = base >> (block + 1);
        return c < min_ch ? min_ch : c;
    }

    void init(int d, int out_ch, int img, int base_ch, int min_ch, GeneratorActivation act) {
        latent_dim = d;
        out_channels = out_ch;
        out_size = img;
        activation = act;
        int blocks = 0, s = const_size;
        while (s < img) {
            s *= 2;
            ++blocks;
        }
        if (s != img)
            throw ConfigError("generator output size " + std::to_string(img) +
                              " is not const_size * 2^k");
        nblocks = blocks;
        const_input = Tensor<T>({base_ch, const_size, const_size});
        const_grad = Tensor<T>({base_ch, const_size, const_size});
        deconvs.resize(static_cast<std::size_t>(blocks));
        convs.resize(static_cast<std::size_t>(blocks));
        styles.resize(static_cast<std::size_t>(blocks));
        int ic = base_ch;
        for (int b = 0; b < blocks; ++b) {
            const int oc = block_channels(base_ch, min_ch, b);
            const std::size_t u = static_cast<std::size_t>(b);
            deconvs[u].init(ic, oc, 4, 2, 1);
            convs[u].init(oc, oc, 3, 1, 1);
            styles[u].init(d, 2 * oc);
            ic = oc;
        }
        to_image.init(ic, out_ch, 3, 1, 1);
    }

    void init_weights(rng::Stream& rs) {
        for (std::int64_t i = 0; i < const_input.numel(); ++i)
            const_input[i] = static_cast<T>(rs.normal(0.0, 1.0));
        for (auto& l : deconvs) l.init_weights(rs);
        for (auto& l : convs) l.init_weights(rs);
        // Style affines start as identity styles: zero weight, bias mapping to
        // scale 1 and shift 0 for every code.
        for (auto& l : styles) {
            l.weight.zero();
            l.bias.zero();
            const int c = l.out_dim / 2;
            for (int j = 0; j < c; ++j) l.bias[j] = T(1);
        }
        to_image.init_weights(rs);
    }

    // (N, d) -> (N, out_channels, out_size, out_size), values in [-1, 1]
    Tensor<T> forward(const Tensor<T>& w, Cache& c) const {
        if (w.rank() != 2 || w.dim(1) != latent_dim)
            throw ShapeError("generator: expected (N," + std::to_string(latent_dim) + "), got " +
                             w.shape_string());
        const int N = w.dim(0);
        const std::size_t B = static_cast<std::size_t>(nblocks);
        c.deconv.resize(B);
        c.conv.resize(B);
        c.style.resize(B);
        c.adain.resize(B);
        c.lact.resize(B);
        c.sact.resize(B);
        c.w = w;

        const int c0 = const_input.dim(0);
        Tensor<T> h({N, c0, const_size, const_size});
        const std::int64_t plane = const_input.numel();
        for (int n = 0; n < N; ++n)
            for (std::int64_t i = 0; i < plane; ++i) h[n * plane + i] = const_input[i];

        for (int b = 0; b < nblocks; ++b) {
            const std::size_t u = static_cast<std::size_t>(b);
            h = deconvs[u].forward(h, c.deconv[u]);
            h = convs[u].forward(h, c.conv[u]);
            const int ch = h.dim(1);
            Tensor<T> sb = styles[u].forward(w, c.style[u]);  // (N, 2*ch)
            Tensor<T> scale({N, ch}), bias({N, ch});
            for (int n = 0; n < N; ++n)
                for (int j = 0; j < ch; ++j) {
                    scale.at(n, j) = sb.at(n, j);
                    bias.at(n, j) = sb.at(n, ch + j);
                }
            h = adain.forward(h, scale, bias, c.adain[u]);
            h = activation == GeneratorActivation::softplus ? softplus.forward(h, c.sact[u])
                                                            : leaky.forward(h, c.lact[u]);
        }
        h = to_image.forward(h, c.to_image);
        return out_act.forward(h, c.out_act);
    }

    // Returns dL/dw; accumulates parameter gradients including the constant.
    Tensor<T> backward(const Tensor<T>& gy, Cache& c) {
        const int N = c.w.dim(0);
        Tensor<T> gw({N, latent_dim});
        Tensor<T> g = out_act.backward(gy, c.out_act);
        g = to_image.backward(g, c.to_image);
        for (int b = nblocks - 1; b >= 0; --b) {
            const std::size_t u = static_cast<std::size_t>(b);
            g = activation == GeneratorActivation::softplus ? softplus.backward(g, c.sact[u])
                                                            : leaky.backward(g, c.lact[u]);
            Tensor<T> gscale, gbias;
            g = adain.backward(g, c.adain[u], gscale, gbias);
            const int ch = gscale.dim(1);
            Tensor<T> gsb({N, 2 * ch});
            for (int n = 0; n < N; ++n)
                for (int j = 0; j < ch; ++j) {
                    gsb.at(n, j) = gscale.at(n, j);
                    gsb.at(n, ch + j) = gbias.at(n, j);
                }
            gw.add(styles[u].backward(gsb, c.style[u]));
            g = convs[u].backward(g, c.conv[u]);
            g = deconvs[u].backward(g, c.deconv[u]);
        }
        const std::int64_t plane = const_input.numel();
        for (int n = 0; n < N; ++n)
            for (std::int64_t i = 0; i < plane; ++i) const_grad[i] += g[n * plane + i];
        return gw;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".const", &const_input, &const_grad});
        for (std::size_t b = 0; b < deconvs.size(); ++b) {
            const std::string p = prefix + ".block" + std::to_string(b);
            deconvs[b].collect(out, p + ".deconv");
            convs[b].collect(out, p + ".conv");
            styles[b].collect(out, p + ".style");
        }
        to_image.collect(out, prefix + ".to_image");
    }
};

}  // namespace psnet
