#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "psnet/layers.hpp"
#include "support/oracles.hpp"

using psnet::Tensor;
namespace rng = psnet::rng;
using oracles::fd_gradient;
using oracles::fill_normal;
using oracles::max_rel_err;

namespace {

// Scalar functional: weighted sum of layer output against a fixed projection,
// so the whole backward path is exercised with a dense upstream gradient.
template <class Layer>
double projected(const Layer& layer, const Tensor<double>& x, const Tensor<double>& r) {
    typename Layer::Cache c;
    Tensor<double> y = const_cast<Layer&>(layer).forward(x, c);
    double acc = 0;
    for (std::int64_t i = 0; i < y.numel(); ++i) acc += y[i] * r[i];
    return acc;
}

}  // namespace

TEST_CASE("convolution output arithmetic") {
    REQUIRE(psnet::conv_out_dim(256, 4, 2, 1) == 128);
    REQUIRE(psnet::conv_out_dim(32, 4, 1, 1) == 31);
    REQUIRE(psnet::conv_out_dim(64, 3, 1, 1) == 64);
    REQUIRE(psnet::deconv_out_dim(4, 4, 2, 1) == 8);
    REQUIRE(psnet::deconv_out_dim(32, 4, 2, 1) == 64);
    for (int in = 8; in <= 70; in += 7)
        for (int k = 3; k <= 4; ++k)
            for (int s = 1; s <= 2; ++s)
                for (int p = 0; p <= 1; ++p)
                    REQUIRE(psnet::conv_out_dim(in, k, s, p) == oracles::ref_conv_out(in, k, s, p));
}

TEST_CASE("im2col and col2im_add are adjoint") {
    rng::Stream s(1);
    const int C = 3, H = 6, W = 5, k = 3, stride = 2, pad = 1;
    const int Ho = psnet::conv_out_dim(H, k, stride, pad);
    const int Wo = psnet::conv_out_dim(W, k, stride, pad);
    Tensor<double> x({C, H, W}), u({C * k * k, Ho * Wo});
    fill_normal(x, s);
    fill_normal(u, s);

    Tensor<double> col({C * k * k, Ho * Wo});
    psnet::im2col(x.data(), C, H, W, k, stride, pad, col.data(), Ho, Wo);
    Tensor<double> back({C, H, W});
    psnet::col2im_add(u.data(), C, H, W, k, stride, pad, back.data(), Ho, Wo);

    double lhs = 0, rhs = 0;
    for (std::int64_t i = 0; i < col.numel(); ++i) lhs += col[i] * u[i];
    for (std::int64_t i = 0; i < x.numel(); ++i) rhs += x[i] * back[i];
    REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("conv2d forward matches the direct loop") {
    rng::Stream s(2);
    for (int trial = 0; trial < 3; ++trial) {
        psnet::Conv2d<double> conv;
        const int k = trial == 1 ? 4 : 3;
        const int stride = trial == 2 ? 2 : 1;
        const int pad = trial % 2;
        conv.init(2, 3, k, stride, pad);
        conv.init_weights(s);
        Tensor<double> x({2, 2, 8, 9});
        fill_normal(x, s);
        typename psnet::Conv2d<double>::Cache c;
        Tensor<double> y = conv.forward(x, c);
        Tensor<double> ref = oracles::naive_conv2d(x, conv.weight, conv.bias, k, stride, pad);
        REQUIRE(y.same_shape(ref));
        REQUIRE(max_rel_err(y, ref) < 1e-12);
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    rng::Stream s(3);
    psnet::Conv2d<double> conv;
    conv.init(2, 3, 3, 2, 1);
    conv.init_weights(s);
    Tensor<double> x({2, 2, 7, 6});
    fill_normal(x, s);
    typename psnet::Conv2d<double>::Cache c;
    Tensor<double> y = conv.forward(x, c);
    Tensor<double> r(y.shape());
    fill_normal(r, s);

    conv.wgrad.zero();
    conv.bgrad.zero();
    Tensor<double> gx = conv.backward(r, c);

    auto loss = [&] { return projected(conv, x, r); };
    REQUIRE(max_rel_err(gx, fd_gradient(x, loss)) < 1e-6);
    REQUIRE(max_rel_err(conv.wgrad, fd_gradient(conv.weight, loss)) < 1e-6);
    REQUIRE(max_rel_err(conv.bgrad, fd_gradient(conv.bias, loss)) < 1e-6);
}

TEST_CASE("deconv forward matches the scatter loop") {
    rng::Stream s(4);
    psnet::ConvTranspose2d<double> dc;
    dc.init(3, 2, 4, 2, 1);
    dc.init_weights(s);
    Tensor<double> x({2, 3, 5, 4});
    fill_normal(x, s);
    typename psnet::ConvTranspose2d<double>::Cache c;
    Tensor<double> y = dc.forward(x, c);
    Tensor<double> ref = oracles::naive_deconv2d(x, dc.weight, dc.bias, 2, 4, 2, 1);
    REQUIRE(y.same_shape(ref));
    REQUIRE(y.dim(2) == 10);
    REQUIRE(max_rel_err(y, ref) < 1e-12);
}

TEST_CASE("deconv gradients match finite differences") {
    rng::Stream s(5);
    psnet::ConvTranspose2d<double> dc;
    dc.init(2, 3, 4, 2, 1);
    dc.init_weights(s);
    Tensor<double> x({1, 2, 4, 5});
    fill_normal(x, s);
    typename psnet::ConvTranspose2d<double>::Cache c;
    Tensor<double> y = dc.forward(x, c);
    Tensor<double> r(y.shape());
    fill_normal(r, s);

    dc.wgrad.zero();
    dc.bgrad.zero();
    Tensor<double> gx = dc.backward(r, c);

    auto loss = [&] { return projected(dc, x, r); };
    REQUIRE(max_rel_err(gx, fd_gradient(x, loss)) < 1e-6);
    REQUIRE(max_rel_err(dc.wgrad, fd_gradient(dc.weight, loss)) < 1e-6);
    REQUIRE(max_rel_err(dc.bgrad, fd_gradient(dc.bias, loss)) < 1e-6);
}

TEST_CASE("max pooling forward and backward") {
    rng::Stream s(6);
    psnet::MaxPool2d<double> pool;
    Tensor<double> x({2, 3, 6, 4});
    fill_normal(x, s);
    typename psnet::MaxPool2d<double>::Cache c;
    Tensor<double> y = pool.forward(x, c);
    REQUIRE(y.shape() == std::vector<int>{2, 3, 3, 2});
    for (int n = 0; n < 2; ++n)
        for (int ch = 0; ch < 3; ++ch)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 2; ++j) {
                    const double m = std::max(
                        std::max(x.at(n, ch, 2 * i, 2 * j), x.at(n, ch, 2 * i, 2 * j + 1)),
                        std::max(x.at(n, ch, 2 * i + 1, 2 * j), x.at(n, ch, 2 * i + 1, 2 * j + 1)));
                    REQUIRE(y.at(n, ch, i, j) == m);
                }

    Tensor<double> r(y.shape());
    fill_normal(r, s);
    Tensor<double> gx = pool.backward(r, c);
    auto loss = [&] { return projected(pool, x, r); };
    REQUIRE(max_rel_err(gx, fd_gradient(x, loss), 1e-3) < 1e-6);

    Tensor<double> odd({1, 1, 5, 4});
    REQUIRE_THROWS_AS(pool.forward(odd, c), psnet::ShapeError);
}

TEST_CASE("linear gradients match finite differences") {
    rng::Stream s(7);
    psnet::Linear<double> lin;
    lin.init(5, 4);
    lin.init_weights(s);
    Tensor<double> x({3, 5});
    fill_normal(x, s);
    typename psnet::Linear<double>::Cache c;
    Tensor<double> y = lin.forward(x, c);
    REQUIRE(y.shape() == std::vector<int>{3, 4});
    Tensor<double> r(y.shape());
    fill_normal(r, s);

    lin.wgrad.zero();
    lin.bgrad.zero();
    Tensor<double> gx = lin.backward(r, c);
    auto loss = [&] { return projected(lin, x, r); };
    REQUIRE(max_rel_err(gx, fd_gradient(x, loss)) < 1e-6);
    REQUIRE(max_rel_err(lin.wgrad, fd_gradient(lin.weight, loss)) < 1e-6);
    REQUIRE(max_rel_err(lin.bgrad, fd_gradient(lin.bias, loss)) < 1e-6);
}

TEST_CASE("instance norm normalizes and differentiates") {
    rng::Stream s(8);
    psnet::InstanceNorm2d<double> norm;
    norm.init(3);
    Tensor<double> x({2, 3, 6, 6});
    fill_normal(x, s, 2.5);
    typename psnet::InstanceNorm2d<double>::Cache c;
    Tensor<double> y = norm.forward(x, c);

    for (int n = 0; n < 2; ++n)
        for (int ch = 0; ch < 3; ++ch) {
            double mean = 0, var = 0;
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) mean += y.at(n, ch, i, j);
            mean /= 36;
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) {
                    const double d = y.at(n, ch, i, j) - mean;
                    var += d * d;
                }
            var /= 36;
            REQUIRE(std::abs(mean) < 1e-4);
            REQUIRE(std::abs(std::sqrt(var) - 1.0) < 1e-3);
        }

    Tensor<double> r(y.shape());
    fill_normal(r, s);
    norm.ggrad.zero();
    norm.bgrad.zero();
    Tensor<double> gx = norm.backward(r, c);
    auto loss = [&] { return projected(norm, x, r); };
    REQUIRE(max_rel_err(gx, fd_gradient(x, loss), 1e-3) < 1e-5);
    REQUIRE(max_rel_err(norm.ggrad, fd_gradient(norm.gamma, loss)) < 1e-6);
    REQUIRE(max_rel_err(norm.bgrad, fd_gradient(norm.beta, loss)) < 1e-6);
}

TEST_CASE("adain applies style statistics") {
    rng::Stream s(9);
    psnet::AdaIN<double> adain;
    const int N = 2, C = 3, H = 8, W = 8;
    Tensor<double> x({N, C, H, W});
    fill_normal(x, s, 3.0);

    typename psnet::AdaIN<double>::Cache c;

    Tensor<double> ones = Tensor<double>::full({N, C}, 1.0);
    Tensor<double> zeros({N, C});
    Tensor<double> y = adain.forward(x, ones, zeros, c);
    for (int n = 0; n < N; ++n)
        for (int ch = 0; ch < C; ++ch) {
            double mean = 0, var = 0;
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) mean += y.at(n, ch, i, j);
            mean /= H * W;
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const double d = y.at(n, ch, i, j) - mean;
                    var += d * d;
                }
            var /= H * W;
            REQUIRE(std::abs(mean) < 1e-4);
            REQUIRE(std::abs(std::sqrt(var) - 1.0) < 1e-4);
        }

    Tensor<double> twos = Tensor<double>::full({N, C}, 2.0);
    Tensor<double> threes = Tensor<double>::full({N, C}, 3.0);
    y = adain.forward(x, twos, threes, c);
    for (int n = 0; n < N; ++n)
        for (int ch = 0; ch < C; ++ch) {
            double mean = 0, var = 0;
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) mean += y.at(n, ch, i, j);
            mean /= H * W;
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const double d = y.at(n, ch, i, j) - mean;
                    var += d * d;
                }
            var /= H * W;
            REQUIRE(std::abs(mean - 3.0) < 1e-3);
            REQUIRE(std::abs(std::sqrt(var) - 2.0) < 1e-3);
        }

    // constant channel: normalized value is 0, output equals the style bias
    Tensor<double> flat = Tensor<double>::full({1, 1, 4, 4}, 5.0);
    Tensor<double> sc = Tensor<double>::full({1, 1}, 2.0);
    Tensor<double> bi = Tensor<double>::full({1, 1}, -0.75);
    Tensor<double> yc = adain.forward(flat, sc, bi, c);
    for (std::int64_t i = 0; i < yc.numel(); ++i) REQUIRE(yc[i] == Catch::Approx(-0.75).margin(1e-9));
    REQUIRE(yc.all_finite());
}

TEST_CASE("adain gradients match finite differences") {
    rng::Stream s(10);
    psnet::AdaIN<double> adain;
    const int N = 2, C = 2, H = 5, W = 4;
    Tensor<double> x({N, C, H, W}), scale({N, C}), bias({N, C});
    fill_normal(x, s, 2.0);
    fill_normal(scale, s);
    fill_normal(bias, s);

    typename psnet::AdaIN<double>::Cache c;
    Tensor<double> y = adain.forward(x, scale, bias, c);
    Tensor<double> r(y.shape());
    fill_normal(r, s);

    Tensor<double> gscale, gbias;
    Tensor<double> gx = adain.backward(r, c, gscale, gbias);

    auto loss = [&] {
        typename psnet::AdaIN<double>::Cache cc;
        Tensor<double> yy = adain.forward(x, scale, bias, cc);
        double acc = 0;
        for (std::int64_t i = 0; i < yy.numel(); ++i) acc += yy[i] * r[i];
        return acc;
    };
    REQUIRE(max_rel_err(gx, fd_gradient(x, loss), 1e-3) < 1e-5);
    REQUIRE(max_rel_err(gscale, fd_gradient(scale, loss)) < 1e-6);
    REQUIRE(max_rel_err(gbias, fd_gradient(bias, loss)) < 1e-6);
}

TEST_CASE("activation gradients match finite differences") {
    rng::Stream s(11);
    Tensor<double> x({3, 7});
    fill_normal(x, s, 2.0);
    Tensor<double> r({3, 7});
    fill_normal(r, s);

    {
        psnet::LeakyReLU<double> act{0.2};
        typename psnet::LeakyReLU<double>::Cache c;
        Tensor<double> y = act.forward(x, c);
        for (std::int64_t i = 0; i < x.numel(); ++i)
            REQUIRE(y[i] == (x[i] > 0 ? x[i] : 0.2 * x[i]));
        Tensor<double> gx = act.backward(r, c);
        auto loss = [&] { return projected(act, x, r); };
        REQUIRE(max_rel_err(gx, fd_gradient(x, loss)) < 1e-6);
    }
    {
        psnet::Softplus<double> act;
        REQUIRE(psnet::Softplus<double>::eval(0.0) == Catch::Approx(std::log(2.0)));
        REQUIRE(psnet::Softplus<double>::eval(30.0) == Catch::Approx(30.0).epsilon(1e-9));
        typename psnet::Softplus<double>::Cache c;
        Tensor<double> y = act.forward(x, c);
        for (std::int64_t i = 0; i < y.numel(); ++i) REQUIRE(y[i] > 0.0);
        Tensor<double> gx = act.backward(r, c);
        auto loss = [&] { return projected(act, x, r); };
        REQUIRE(max_rel_err(gx, fd_gradient(x, loss)) < 1e-6);
    }
    {
        psnet::Tanh<double> act;
        typename psnet::Tanh<double>::Cache c;
        Tensor<double> y = act.forward(x, c);
        for (std::int64_t i = 0; i < y.numel(); ++i) {
            REQUIRE(y[i] <= 1.0);
            REQUIRE(y[i] >= -1.0);
        }
        Tensor<double> gx = act.backward(r, c);
        auto loss = [&] { return projected(act, x, r); };
        REQUIRE(max_rel_err(gx, fd_gradient(x, loss)) < 1e-6);
    }
}
