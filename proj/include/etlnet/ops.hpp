#pragma once

#include <cmath>
#include <cstddef>

#include "etlnet/rng.hpp"
#include "etlnet/tensor.hpp"

namespace etlnet {

enum class EwiseOp { add, sub, mul };

// [m x k] * [k x n] -> [m x n]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Identical shapes only; no broadcasting beyond the scalar overload.
template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, const Tensor<T>& b);

template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, T b);

template <class T, class F>
Tensor<T> map(const Tensor<T>& a, F&& f) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<T>(f(a[i]));
    return out;
}

// Values in [lo, hi); throws ArgumentError unless lo < hi.
template <class T>
Tensor<T> rng_uniform(Rng& rng, Shape shape, T lo, T hi);

template <class T>
inline T sigmoid(T z) {
    // Split on sign so exp never overflows.
    if (z >= T{0}) return T{1} / (T{1} + std::exp(-z));
    const T e = std::exp(z);
    return e / (T{1} + e);
}

template <class T>
inline T relu(T z) {
    return z > T{0} ? z : T{0};
}

// Row-major GEMM building blocks over raw strided buffers, dispatched to the
// active SIMD backend. When accumulate is false C is overwritten.
namespace blas {

// C[m x n] (+)= A[m x k] * B[k x n]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

// C[m x n] (+)= A[k x m]^T * B[k x n]
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

}  // namespace blas

}  // namespace etlnet
