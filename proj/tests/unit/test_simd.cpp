#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "etlnet/ops.hpp"
#include "etlnet/rng.hpp"
#include "etlnet/simd/kernels.hpp"

using namespace etlnet;
using simd::Backend;

namespace {

template <class T>
std::vector<T> random_vec(Rng& rng, std::size_t n) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(-2.0, 2.0));
    return v;
}

template <class T>
void expect_tables_agree(T tol) {
    if (!simd::backend_available(Backend::avx2)) GTEST_SKIP() << "AVX2 not available on this CPU";
    const auto& ref = simd::table<T>(Backend::scalar);
    const auto& vec = simd::table<T>(Backend::avx2);
    Rng rng(77);
    // Lengths straddle every vector width and tail combination.
    for (std::size_t n = 0; n <= 67; ++n) {
        auto a = random_vec<T>(rng, n), b = random_vec<T>(rng, n);
        const T scale = static_cast<T>(n + 1);
        EXPECT_NEAR(ref.dot(a.data(), b.data(), n), vec.dot(a.data(), b.data(), n), tol * scale) << n;
        EXPECT_NEAR(ref.sum(a.data(), n), vec.sum(a.data(), n), tol * scale) << n;

        auto y1 = b, y2 = b;
        ref.axpy(T(0.75), a.data(), y1.data(), n);
        vec.axpy(T(0.75), a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], tol);

        std::vector<T> o1(n), o2(n);
        ref.add(a.data(), b.data(), o1.data(), n);
        vec.add(a.data(), b.data(), o2.data(), n);
        EXPECT_EQ(o1, o2);
        ref.mul(a.data(), b.data(), o1.data(), n);
        vec.mul(a.data(), b.data(), o2.data(), n);
        EXPECT_EQ(o1, o2);
        ref.scale(T(-1.5), a.data(), o1.data(), n);
        vec.scale(T(-1.5), a.data(), o2.data(), n);
        EXPECT_EQ(o1, o2);
    }
}

template <class T>
void expect_activations_agree(T tol) {
    if (!simd::backend_available(Backend::avx2)) GTEST_SKIP() << "AVX2 not available on this CPU";
    const auto& ref = simd::table<T>(Backend::scalar);
    const auto& vec = simd::table<T>(Backend::avx2);
    // Wide range including saturation and the clamp region.
    std::vector<T> x;
    for (double v = -800.0; v <= 800.0; v += 0.37) x.push_back(static_cast<T>(v));
    for (double v = -3.0; v <= 3.0; v += 1e-3) x.push_back(static_cast<T>(v));
    x.push_back(T(0));
    x.push_back(T(1e-12));
    for (std::size_t n : {x.size(), std::size_t{1}, std::size_t{3}, std::size_t{5}}) {
        std::vector<T> o1(n), o2(n);
        ref.sigmoid(x.data(), o1.data(), n);
        vec.sigmoid(x.data(), o2.data(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(o1[i], o2[i], tol) << "sigmoid(" << x[i] << ")";
        ref.tanh(x.data(), o1.data(), n);
        vec.tanh(x.data(), o2.data(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(o1[i], o2[i], tol) << "tanh(" << x[i] << ")";
    }
}

template <class T>
void expect_gemm_kernels_agree(T tol) {
    if (!simd::backend_available(Backend::avx2)) GTEST_SKIP() << "AVX2 not available on this CPU";
    const auto& ref = simd::table<T>(Backend::scalar);
    const auto& vec = simd::table<T>(Backend::avx2);
    Rng rng(91);
    // Every row-block / column-block / tail combination, with padded leading dimensions.
    for (std::size_t m : {1, 3, 4, 5, 9})
        for (std::size_t n : {1, 4, 7, 8, 16, 19})
            for (std::size_t k : {1, 2, 17}) {
                const std::size_t lda = k + 1, ldb = n + 2, ldc = n + 3;
                auto a = random_vec<T>(rng, m * lda), b = random_vec<T>(rng, k * ldb), c = random_vec<T>(rng, m * ldc);
                auto c1 = c, c2 = c;
                ref.gemm(m, n, k, a.data(), lda, b.data(), ldb, c1.data(), ldc);
                vec.gemm(m, n, k, a.data(), lda, b.data(), ldb, c2.data(), ldc);
                for (std::size_t i = 0; i < c.size(); ++i) {
                    if (i % ldc >= n) EXPECT_EQ(c1[i], c[i]);  // padding untouched
                    EXPECT_NEAR(c1[i], c2[i], tol * static_cast<T>(k + 1)) << m << "x" << n << "x" << k;
                }
            }
}

class BackendGuard {
public:
    BackendGuard() : saved_(simd::active_backend()) {}
    ~BackendGuard() { simd::set_active_backend(saved_); }

private:
    Backend saved_;
};

}  // namespace

TEST(SimdEquivalence, FloatKernelsMatchScalar) { expect_tables_agree<float>(1e-5f); }
TEST(SimdEquivalence, DoubleKernelsMatchScalar) { expect_tables_agree<double>(1e-13); }

TEST(SimdEquivalence, FloatActivationsMatchScalar) { expect_activations_agree<float>(2e-7f); }
TEST(SimdEquivalence, DoubleActivationsMatchScalar) { expect_activations_agree<double>(1e-15); }
TEST(SimdEquivalence, FloatGemmKernelMatchesScalar) { expect_gemm_kernels_agree<float>(1e-5f); }
TEST(SimdEquivalence, DoubleGemmKernelMatchesScalar) { expect_gemm_kernels_agree<double>(1e-13); }

TEST(SimdEquivalence, GemmVariantsMatchAcrossBackends) {
    if (!simd::backend_available(Backend::avx2)) GTEST_SKIP();
    BackendGuard guard;
    Rng rng(8);
    const std::size_t m = 13, n = 19, k = 23;
    auto a = random_vec<double>(rng, m * k), b = random_vec<double>(rng, k * n), bt = random_vec<double>(rng, n * k),
         at = random_vec<double>(rng, k * m);
    auto run = [&](Backend be) {
        simd::set_active_backend(be);
        std::vector<double> c1(m * n), c2(m * n), c3(m * n);
        blas::gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n, false);
        blas::gemm_nt(m, n, k, a.data(), k, bt.data(), k, c2.data(), n, false);
        blas::gemm_tn(m, n, k, at.data(), m, b.data(), n, c3.data(), n, false);
        return std::vector<std::vector<double>>{c1, c2, c3};
    };
    auto s = run(Backend::scalar), v = run(Backend::avx2);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t i = 0; i < m * n; ++i) EXPECT_NEAR(s[r][i], v[r][i], 1e-12);
}

TEST(SimdDispatch, BackendNamesRoundTrip) {
    EXPECT_EQ(simd::parse_backend("scalar"), Backend::scalar);
    EXPECT_EQ(simd::parse_backend(simd::to_string(Backend::avx2)), Backend::avx2);
    EXPECT_THROW(simd::parse_backend("sse9"), ArgumentError);
    EXPECT_TRUE(simd::backend_available(Backend::scalar));
}
