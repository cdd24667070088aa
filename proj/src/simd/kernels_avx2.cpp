// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "etlnet/simd/kernels.hpp"

namespace etlnet::simd::avx2 {

namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

float dot_f(const float* a, const float* b, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    }
    float acc = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double dot_d(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_f(float alpha, const float* x, float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_d(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_f(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void add_d(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_f(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_d(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_f(float alpha, const float* x, float* out, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
}

void scale_d(double alpha, const double* x, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
}

float sum_f(const float* x, std::size_t n) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double sum_d(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

// exp over four doubles: Cody-Waite reduction by ln 2, degree-12 Taylor
// polynomial on |r| <= ln2/2, exponent rebuilt from the integer bits. The
// input is clamped to [-708, 709] so the result stays normal and finite.
inline __m256d exp_pd(__m256d x) {
    x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(709.0));
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);
    static constexpr double inv_fact[] = {1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
                                          1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,     1.0 / 120.0,
                                          1.0 / 24.0,        1.0 / 6.0,        0.5,             1.0,
                                          1.0};
    __m256d p = _mm256_set1_pd(inv_fact[0]);
    for (std::size_t i = 1; i < 13; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(inv_fact[i]));
    // n + 1.5 * 2^52 puts n in the low mantissa bits.
    const __m256d magic = _mm256_set1_pd(6755399441055744.0);
    const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline __m256d sigmoid_pd(__m256d x) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), x));
    return _mm256_div_pd(one, _mm256_add_pd(one, e));
}

// tanh|x| = (1 - e) / (1 + e) with e = exp(-2|x|), sign restored afterwards.
inline __m256d tanh_pd(__m256d x) {
    const __m256d sign = _mm256_and_pd(x, _mm256_set1_pd(-0.0));
    const __m256d ax = _mm256_andnot_pd(_mm256_set1_pd(-0.0), x);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d e = exp_pd(_mm256_mul_pd(ax, _mm256_set1_pd(-2.0)));
    return _mm256_or_pd(_mm256_div_pd(_mm256_sub_pd(one, e), _mm256_add_pd(one, e)), sign);
}

template <__m256d (*F)(__m256d)>
void map_d(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, F(_mm256_loadu_pd(x + i)));
    if (i < n) {
        alignas(32) double buf[4] = {0, 0, 0, 0};
        for (std::size_t j = i; j < n; ++j) buf[j - i] = x[j];
        _mm256_store_pd(buf, F(_mm256_load_pd(buf)));
        for (std::size_t j = i; j < n; ++j) out[j] = buf[j - i];
    }
}

// Single precision goes through the double path, four lanes at a time.
template <__m256d (*F)(__m256d)>
void map_f(const float* x, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm_storeu_ps(out + i, _mm256_cvtpd_ps(F(_mm256_cvtps_pd(_mm_loadu_ps(x + i)))));
    if (i < n) {
        alignas(32) double buf[4] = {0, 0, 0, 0};
        for (std::size_t j = i; j < n; ++j) buf[j - i] = x[j];
        _mm256_store_pd(buf, F(_mm256_load_pd(buf)));
        for (std::size_t j = i; j < n; ++j) out[j] = static_cast<float>(buf[j - i]);
    }
}

struct VecF {
    using T = float;
    using R = __m256;
    static constexpr std::size_t W = 8;
    static R load(const T* p) { return _mm256_loadu_ps(p); }
    static void store(T* p, R v) { _mm256_storeu_ps(p, v); }
    static R set1(T v) { return _mm256_set1_ps(v); }
    static R fmadd(R a, R b, R c) { return _mm256_fmadd_ps(a, b, c); }
};

struct VecD {
    using T = double;
    using R = __m256d;
    static constexpr std::size_t W = 4;
    static R load(const T* p) { return _mm256_loadu_pd(p); }
    static void store(T* p, R v) { _mm256_storeu_pd(p, v); }
    static R set1(T v) { return _mm256_set1_pd(v); }
    static R fmadd(R a, R b, R c) { return _mm256_fmadd_pd(a, b, c); }
};

// ROWS rows of C, two vectors of columns at a time, accumulators kept in
// registers across the whole k loop.
template <class V, std::size_t ROWS>
void gemm_rows(std::size_t n, std::size_t k, const typename V::T* a, std::size_t lda, const typename V::T* b,
               std::size_t ldb, typename V::T* c, std::size_t ldc) {
    using R = typename V::R;
    constexpr std::size_t W = V::W;
    std::size_t j = 0;
    for (; j + 2 * W <= n; j += 2 * W) {
        R acc[ROWS][2];
        for (std::size_t r = 0; r < ROWS; ++r) {
            acc[r][0] = V::load(c + r * ldc + j);
            acc[r][1] = V::load(c + r * ldc + j + W);
        }
        for (std::size_t p = 0; p < k; ++p) {
            const R b0 = V::load(b + p * ldb + j);
            const R b1 = V::load(b + p * ldb + j + W);
            for (std::size_t r = 0; r < ROWS; ++r) {
                const R av = V::set1(a[r * lda + p]);
                acc[r][0] = V::fmadd(av, b0, acc[r][0]);
                acc[r][1] = V::fmadd(av, b1, acc[r][1]);
            }
        }
        for (std::size_t r = 0; r < ROWS; ++r) {
            V::store(c + r * ldc + j, acc[r][0]);
            V::store(c + r * ldc + j + W, acc[r][1]);
        }
    }
    for (; j + W <= n; j += W) {
        R acc[ROWS];
        for (std::size_t r = 0; r < ROWS; ++r) acc[r] = V::load(c + r * ldc + j);
        for (std::size_t p = 0; p < k; ++p) {
            const R b0 = V::load(b + p * ldb + j);
            for (std::size_t r = 0; r < ROWS; ++r) acc[r] = V::fmadd(V::set1(a[r * lda + p]), b0, acc[r]);
        }
        for (std::size_t r = 0; r < ROWS; ++r) V::store(c + r * ldc + j, acc[r]);
    }
    for (; j < n; ++j)
        for (std::size_t r = 0; r < ROWS; ++r) {
            typename V::T acc = c[r * ldc + j];
            for (std::size_t p = 0; p < k; ++p) acc += a[r * lda + p] * b[p * ldb + j];
            c[r * ldc + j] = acc;
        }
}

template <class V>
void gemm(std::size_t m, std::size_t n, std::size_t k, const typename V::T* a, std::size_t lda,
          const typename V::T* b, std::size_t ldb, typename V::T* c, std::size_t ldc) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) gemm_rows<V, 4>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc);
    for (; i < m; ++i) gemm_rows<V, 1>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc);
}

}  // namespace

template <>
const KernelTable<float>& table<float>() {
    static const KernelTable<float> t{&dot_f, &axpy_f, &add_f, &mul_f, &scale_f, &sum_f, &map_f<sigmoid_pd>, &map_f<tanh_pd>, &gemm<VecF>};
    return t;
}

template <>
const KernelTable<double>& table<double>() {
    static const KernelTable<double> t{&dot_d, &axpy_d, &add_d, &mul_d, &scale_d, &sum_d, &map_d<sigmoid_pd>, &map_d<tanh_pd>, &gemm<VecD>};
    return t;
}

}  // namespace etlnet::simd::avx2
