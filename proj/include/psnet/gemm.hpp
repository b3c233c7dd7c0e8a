#pragma once

#include <cstdint>
#include <cstring>

namespace psnet {

// Small row-major matrix kernels. The inner loops are laid out so the
// compiler can vectorize them; at the sizes this project runs (k, n up to a
// few thousand) that is fast enough on one core.

// C(m,n) = A(m,k) * B(k,n), optionally accumulating into C.
template <typename T>
void gemm_nn(int m, int n, int k, const T* A, const T* B, T* C, bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        const T* __restrict a = A + static_cast<std::size_t>(i) * k;
        T* __restrict c = C + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = a[p];
            if (av == T(0)) continue;
            const T* __restrict b = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C(m,n) = A(m,k) * B(n,k)^T, dot products of contiguous rows.
template <typename T>
void gemm_nt(int m, int n, int k, const T* A, const T* B, T* C, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const T* __restrict a = A + static_cast<std::size_t>(i) * k;
        T* __restrict c = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* __restrict b = B + static_cast<std::size_t>(j) * k;
            T acc = 0;
            for (int p = 0; p < k; ++p) acc += a[p] * b[p];
            c[j] = accumulate ? c[j] + acc : acc;
        }
    }
}

// C(m,n) = A(k,m)^T * B(k,n)
template <typename T>
void gemm_tn(int m, int n, int k, const T* A, const T* B, T* C, bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const T* __restrict a = A + static_cast<std::size_t>(p) * m;
        const T* __restrict b = B + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const T av = a[i];
            if (av == T(0)) continue;
            T* __restrict c = C + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace psnet
