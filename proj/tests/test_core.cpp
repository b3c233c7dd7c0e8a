#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "psnet/gemm.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"
#include "support/oracles.hpp"

using psnet::ShapeError;
using psnet::Tensor;
namespace rng = psnet::rng;

TEST_CASE("tensor shape bookkeeping") {
    Tensor<double> t({2, 3, 4});
    REQUIRE(t.rank() == 3);
    REQUIRE(t.numel() == 24);
    REQUIRE(t.dim(1) == 3);
    t.at(1, 2, 3) = 7.0;
    REQUIRE(t[t.numel() - 1] == 7.0);

    t.reshape({6, 4});
    REQUIRE(t.rank() == 2);
    REQUIRE(t.at(5, 3) == 7.0);
    REQUIRE_THROWS_AS(t.reshape({5, 5}), ShapeError);

    Tensor<double> u({6, 4});
    REQUIRE(t.same_shape(u));
    REQUIRE_THROWS_AS(psnet::require_same_shape(t, Tensor<double>({4, 6}), "test"), ShapeError);
}

TEST_CASE("tensor arithmetic helpers") {
    Tensor<double> a = Tensor<double>::full({4}, 2.0);
    Tensor<double> b = Tensor<double>::full({4}, 3.0);
    a.add_scaled(b, 0.5);
    for (int i = 0; i < 4; ++i) REQUIRE(a[i] == 3.5);
    a.scale(2.0);
    REQUIRE(a[0] == 7.0);
    REQUIRE(a.all_finite());
    a[2] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_FALSE(a.all_finite());
}

TEST_CASE("stream determinism and derivation") {
    rng::Stream a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.raw() == b.raw());

    REQUIRE(rng::derive(1, "x") != rng::derive(1, "y"));
    REQUIRE(rng::derive(1, "x", 0) != rng::derive(1, "x", 1));
    REQUIRE(rng::derive(1, "x", 0, 0) != rng::derive(1, "x", 0, 1));
    REQUIRE(rng::derive(1, "x", 2, 3) == rng::derive(1, "x", 2, 3));
}

TEST_CASE("uniform and normal draws behave") {
    rng::Stream s(7);
    double mn = 1.0, mx = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        mn = std::min(mn, u);
        mx = std::max(mx, u);
    }
    REQUIRE(mn < 0.01);
    REQUIRE(mx > 0.99);

    double sum = 0, sq = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const double x = s.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.03);
    REQUIRE(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("uniform_int covers range without bias artifacts") {
    rng::Stream s(11);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = s.uniform_int(-3, 3);
        REQUIRE(v >= -3);
        REQUIRE(v <= 3);
        seen.insert(v);
    }
    REQUIRE(seen.size() == 7);
}

TEST_CASE("shuffle is a permutation and seed-stable") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    rng::Stream s(5);
    s.shuffle(v);
    std::vector<int> w = v;
    std::sort(w.begin(), w.end());
    for (int i = 0; i < 50; ++i) REQUIRE(w[static_cast<std::size_t>(i)] == i);

    std::vector<int> v2(50);
    std::iota(v2.begin(), v2.end(), 0);
    rng::Stream s2(5);
    s2.shuffle(v2);
    REQUIRE(v == v2);
}

TEST_CASE("gemm kernels match the naive triple loop") {
    rng::Stream s(123);
    for (int trial = 0; trial < 5; ++trial) {
        const int m = 1 + static_cast<int>(s.uniform_int(1, 7));
        const int n = 1 + static_cast<int>(s.uniform_int(1, 7));
        const int k = 1 + static_cast<int>(s.uniform_int(1, 7));
        Tensor<double> A({m, k}), B({k, n}), Bt({n, k}), At({k, m});
        oracles::fill_normal(A, s);
        oracles::fill_normal(B, s);
        oracles::fill_normal(Bt, s);
        oracles::fill_normal(At, s);

        Tensor<double> C({m, n}), ref({m, n});
        psnet::gemm_nn(m, n, k, A.data(), B.data(), C.data(), false);
        oracles::naive_gemm(m, n, k, A.data(), B.data(), ref.data(), false, false);
        REQUIRE(oracles::max_rel_err(C, ref) < 1e-12);

        psnet::gemm_nt(m, n, k, A.data(), Bt.data(), C.data(), false);
        oracles::naive_gemm(m, n, k, A.data(), Bt.data(), ref.data(), false, true);
        REQUIRE(oracles::max_rel_err(C, ref) < 1e-12);

        psnet::gemm_tn(m, n, k, At.data(), B.data(), C.data(), false);
        oracles::naive_gemm(m, n, k, At.data(), B.data(), ref.data(), true, false);
        REQUIRE(oracles::max_rel_err(C, ref) < 1e-12);

        // accumulate mode adds on top of existing contents
        Tensor<double> C2 = C;
        psnet::gemm_nn(m, n, k, A.data(), B.data(), C2.data(), true);
        oracles::naive_gemm(m, n, k, A.data(), B.data(), ref.data(), false, false);
        for (std::int64_t i = 0; i < C2.numel(); ++i)
            REQUIRE(C2[i] == Catch::Approx(C[i] + ref[i]).epsilon(1e-12));
    }
}
