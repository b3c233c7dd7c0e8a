#pragma once

#include <string>
#include <vector>

#include "psnet/layers.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// Shared-weight mapping network F: image -> latent code. One parameter set
// serves both modalities. Conv 3x3 + leaky + 2x2 max-pool per stage, channel
// count doubling from base_channels, then a fully-connected head.
template <typename T>
struct MappingNetwork {
    int image_size = 0;
    int in_channels = 3;
    int stages = 0;
    int base_channels = 0;
    int latent_dim = 0;

    std::vector<Conv2d<T>> convs;
    Linear<T> fc;
    LeakyReLU<T> act{T(0.2)};
    MaxPool2d<T> pool;

    struct Cache {
        std::vector<typename Conv2d<T>::Cache> conv;
        std::vector<typename LeakyReLU<T>::Cache> act;
        std::vector<typename MaxPool2d<T>::Cache> pool;
        typename Linear<T>::Cache fc;
        std::vector<int> pre_fc_shape;
    };

    void init(int img, int in_ch, int nstages, int base_ch, int d) {
        if (nstages < 1) throw ConfigError("mapping network needs at least 1 stage");
        if (img % (1 << nstages) != 0)
            throw ConfigError("image size " + std::to_string(img) + " not divisible by 2^" +
                              std::to_string(nstages));
        image_size = img;
        in_channels = in_ch;
        stages = nstages;
        base_channels = base_ch;
        latent_dim = d;
        convs.resize(static_cast<std::size_t>(nstages));
        int ic = in_ch, oc = base_ch;
        for (int i = 0; i < nstages; ++i) {
            convs[static_cast<std::size_t>(i)].init(ic, oc, 3, 1, 1);
            ic = oc;
            oc *= 2;
        }
        const int final_side = img >> nstages;
        fc.init(ic * final_side * final_side, d);
    }

    void init_weights(rng::Stream& rs) {
        for (auto& c : convs) c.init_weights(rs);
        fc.init_weights(rs);
    }

    // (N, in_channels, S, S) -> (N, latent_dim)
    Tensor<T> forward(const Tensor<T>& x, Cache& c) const {
        if (x.rank() != 4 || x.dim(1) != in_channels || x.dim(2) != image_size ||
            x.dim(3) != image_size)
            throw ShapeError("mapping network: expected (N," + std::to_string(in_channels) + "," +
                             std::to_string(image_size) + "," + std::to_string(image_size) +
                             "), got " + x.shape_string());
        const std::size_t S = static_cast<std::size_t>(stages);
        c.conv.resize(S);
        c.act.resize(S);
        c.pool.resize(S);
        Tensor<T> h = x;
        for (int i = 0; i < stages; ++i) {
            const std::size_t u = static_cast<std::size_t>(i);
            h = convs[u].forward(h, c.conv[u]);
            h = act.forward(h, c.act[u]);
            h = pool.forward(h, c.pool[u]);
        }
        c.pre_fc_shape = h.shape();
        h.reshape({h.dim(0), static_cast<int>(h.numel() / h.dim(0))});
        return fc.forward(h, c.fc);
    }

    Tensor<T> backward(const Tensor<T>& gw, Cache& c) {
        Tensor<T> g = fc.backward(gw, c.fc);
        g.reshape(c.pre_fc_shape);
        for (int i = stages - 1; i >= 0; --i) {
            const std::size_t u = static_cast<std::size_t>(i);
            g = pool.backward(g, c.pool[u]);
            g = act.backward(g, c.act[u]);
            g = convs[u].backward(g, c.conv[u]);
        }
        return g;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].collect(out, prefix + ".conv" + std::to_string(i));
        fc.collect(out, prefix + ".fc");
    }
};

}  // namespace psnet
