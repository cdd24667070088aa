#include "etlnet/ops.hpp"

#include <algorithm>
#include <vector>

#include "etlnet/simd/kernels.hpp"

namespace etlnet {

namespace blas {

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    if (!accumulate) {
        if (ldc == n) std::fill(c, c + m * n, T{0});
        else
            for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T{0});
    }
    simd::kernels<T>().gemm(m, n, k, a, lda, b, ldb, c, ldc);
}

// The transposed forms copy the transposed operand once and reuse the nn
// kernel; the copy is O(mk) or O(nk) against O(mnk) work.
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    std::vector<T> bt(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * ldb + p];
    gemm_nn(m, n, k, a, lda, bt.data(), n, c, ldc, accumulate);
}

template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    std::vector<T> at(m * k);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) at[i * k + p] = a[p * lda + i];
    gemm_nn(m, n, k, at.data(), k, b, ldb, c, ldc, accumulate);
}

#define ETLNET_INSTANTIATE_GEMM(T)                                                                   \
    template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, std::size_t, const T*, \
                             std::size_t, T*, std::size_t, bool);                                    \
    template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, std::size_t, const T*, \
                             std::size_t, T*, std::size_t, bool);                                    \
    template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, std::size_t, const T*, \
                             std::size_t, T*, std::size_t, bool);
ETLNET_INSTANTIATE_GEMM(float)
ETLNET_INSTANTIATE_GEMM(double)
#undef ETLNET_INSTANTIATE_GEMM

}  // namespace blas

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<T> c({m, n});
    blas::gemm_nn(m, n, k, a.ptr(), k, b.ptr(), n, c.ptr(), n, false);
    return c;
}

template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("ewise: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    Tensor<T> out(a.shape());
    const auto& kt = simd::kernels<T>();
    switch (op) {
        case EwiseOp::add: kt.add(a.ptr(), b.ptr(), out.ptr(), a.size()); break;
        case EwiseOp::mul: kt.mul(a.ptr(), b.ptr(), out.ptr(), a.size()); break;
        case EwiseOp::sub:
            for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
            break;
    }
    return out;
}

template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, T b) {
    Tensor<T> out(a.shape());
    switch (op) {
        case EwiseOp::add:
            for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b;
            break;
        case EwiseOp::sub:
            for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b;
            break;
        case EwiseOp::mul: simd::kernels<T>().scale(b, a.ptr(), out.ptr(), a.size()); break;
    }
    return out;
}

template <class T>
Tensor<T> rng_uniform(Rng& rng, Shape shape, T lo, T hi) {
    if (!(lo < hi)) {
        throw ArgumentError("rng_uniform requires lo < hi, got lo=" + std::to_string(lo) +
                            " hi=" + std::to_string(hi));
    }
    Tensor<T> out(std::move(shape));
    for (auto& v : out.data()) {
        v = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
        // Narrowing to float can round up onto hi.
        if (!(v < hi)) v = std::nextafter(hi, lo);
    }
    return out;
}

template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> ewise(EwiseOp, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> ewise(EwiseOp, const Tensor<double>&, const Tensor<double>&);
template Tensor<float> ewise(EwiseOp, const Tensor<float>&, float);
template Tensor<double> ewise(EwiseOp, const Tensor<double>&, double);
template Tensor<float> rng_uniform(Rng&, Shape, float, float);
template Tensor<double> rng_uniform(Rng&, Shape, double, double);

}  // namespace etlnet
