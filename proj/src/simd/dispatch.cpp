#include <atomic>
#include <cstdlib>
#include <string>

#include "etlnet/errors.hpp"
#include "etlnet/simd/kernels.hpp"

namespace etlnet::simd {

namespace {

bool cpu_has_avx2() {
#if defined(ETLNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::atomic<Backend>& active() {
    static std::atomic<Backend> backend{detect_backend()};
    return backend;
}

}  // namespace

std::string_view to_string(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "unknown";
}

Backend parse_backend(std::string_view text) {
    if (text == "scalar") return Backend::scalar;
    if (text == "avx2") return Backend::avx2;
    throw ArgumentError("unknown kernel backend '" + std::string(text) + "' (expected scalar or avx2)");
}

bool backend_available(Backend b) {
    if (b == Backend::scalar) return true;
    static const bool avx2 = cpu_has_avx2();
    return avx2;
}

Backend detect_backend() {
    if (const char* env = std::getenv("ETLNET_KERNELS"); env != nullptr && *env != '\0' &&
                                                          std::string_view(env) != "auto") {
        Backend requested = parse_backend(env);
        if (backend_available(requested)) return requested;
        return Backend::scalar;
    }
    return backend_available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

Backend active_backend() { return active().load(std::memory_order_relaxed); }

void set_active_backend(Backend b) {
    if (!backend_available(b)) {
        throw ArgumentError("kernel backend '" + std::string(to_string(b)) + "' is not available on this CPU");
    }
    active().store(b, std::memory_order_relaxed);
}

template <class T>
const KernelTable<T>& table(Backend b) {
#if defined(ETLNET_HAVE_AVX2)
    if (b == Backend::avx2) return avx2::table<T>();
#endif
    (void)b;
    return scalar::table<T>();
}

template const KernelTable<float>& table<float>(Backend);
template const KernelTable<double>& table<double>(Backend);

}  // namespace etlnet::simd
