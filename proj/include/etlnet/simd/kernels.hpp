#pragma once

#include <cstddef>
#include <string_view>

namespace etlnet::simd {

enum class Backend { scalar, avx2 };

// Vector primitives every layer's inner loop is built from. Each backend
// provides one table per element type; the scalar table is the reference the
// others are equivalence-tested against.
template <class T>
struct KernelTable {
    T (*dot)(const T* a, const T* b, std::size_t n);
    void (*axpy)(T alpha, const T* x, T* y, std::size_t n);  // y += alpha * x
    void (*add)(const T* a, const T* b, T* out, std::size_t n);
    void (*mul)(const T* a, const T* b, T* out, std::size_t n);
    void (*scale)(T alpha, const T* x, T* out, std::size_t n);
    T (*sum)(const T* x, std::size_t n);
    void (*sigmoid)(const T* x, T* out, std::size_t n);
    void (*tanh)(const T* x, T* out, std::size_t n);
    // C[m x n] += A[m x k] * B[k x n], row-major with leading dimensions.
    void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
                 std::size_t ldb, T* c, std::size_t ldc);
};

std::string_view to_string(Backend b);
Backend parse_backend(std::string_view text);

bool backend_available(Backend b);

// Best available backend, unless ETLNET_KERNELS=scalar|avx2 pins one.
Backend detect_backend();

Backend active_backend();
void set_active_backend(Backend b);  // throws ArgumentError if unavailable

template <class T>
const KernelTable<T>& table(Backend b);

template <class T>
const KernelTable<T>& kernels() {
    return table<T>(active_backend());
}

namespace scalar {
template <class T>
const KernelTable<T>& table();
}

#if defined(ETLNET_HAVE_AVX2)
namespace avx2 {
template <class T>
const KernelTable<T>& table();
}
#endif

}  // namespace etlnet::simd
