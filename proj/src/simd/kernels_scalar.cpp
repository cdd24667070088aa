#include <cmath>

#include "etlnet/ops.hpp"
#include "etlnet/simd/kernels.hpp"

namespace etlnet::simd::scalar {

namespace {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc{0};
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void add(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void scale(T alpha, const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <class T>
T sum(const T* x, std::size_t n) {
    T acc{0};
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <class T>
void sigmoid_n(const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = etlnet::sigmoid(x[i]);
}

template <class T>
void tanh_n(const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

template <class T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb,
          T* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * lda + p];
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += av * b[p * ldb + j];
        }
}

}  // namespace

template <class T>
const KernelTable<T>& table() {
    static const KernelTable<T> t{&dot<T>, &axpy<T>, &add<T>, &mul<T>, &scale<T>, &sum<T>, &sigmoid_n<T>, &tanh_n<T>, &gemm<T>};
    return t;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace etlnet::simd::scalar
