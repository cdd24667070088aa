#include <vector>

#include "etlnet/layers.hpp"
#include "etlnet/ops.hpp"
#include "internal.hpp"

namespace etlnet {

namespace {

// [out x in x k] -> k blocks of [out x in] so each tap is a contiguous GEMM operand.
template <class T>
std::vector<T> split_taps(const Tensor<T>& w) {
    const std::size_t out = w.dim(0), in = w.dim(1), k = w.dim(2);
    std::vector<T> taps(out * in * k);
    for (std::size_t f = 0; f < out; ++f)
        for (std::size_t c = 0; c < in; ++c)
            for (std::size_t j = 0; j < k; ++j) taps[(j * out + f) * in + c] = w.at(f, c, j);
    return taps;
}

// Same blocks transposed: k blocks of [in x out], so y += x * W_j^T is a plain GEMM.
template <class T>
std::vector<T> split_taps_transposed(const Tensor<T>& w) {
    const std::size_t out = w.dim(0), in = w.dim(1), k = w.dim(2);
    std::vector<T> taps(out * in * k);
    for (std::size_t f = 0; f < out; ++f)
        for (std::size_t c = 0; c < in; ++c)
            for (std::size_t j = 0; j < k; ++j) taps[(j * in + c) * out + f] = w.at(f, c, j);
    return taps;
}

template <class T>
void check_params(const ConvParams<T>& p) {
    require_rank(p.weight.shape(), 3, "causal_conv1d weight");
    if (p.bias.size() != p.out_channels()) {
        throw DimensionError("causal_conv1d: bias " + shape_str(p.bias.shape()) + " does not match weight " +
                             shape_str(p.weight.shape()));
    }
    if (p.dilation < 1 || p.kernel() < 1) throw ArgumentError("causal_conv1d: dilation and kernel must be >= 1");
}

}  // namespace

template <class T>
std::pair<Tensor<T>, ConvCache<T>> causal_conv1d_forward(const Tensor<T>& x, const ConvParams<T>& p) {
    check_params(p);
    require_rank(x.shape(), 3, "causal_conv1d input");
    const std::size_t batch = x.dim(0), steps = x.dim(1), in = x.dim(2);
    if (steps < 1) throw DimensionError("causal_conv1d: sequence length must be >= 1");
    if (in != p.in_channels()) {
        throw DimensionError("causal_conv1d: input " + shape_str(x.shape()) + " has " + std::to_string(in) +
                             " channels but weight " + shape_str(p.weight.shape()) + " expects " +
                             std::to_string(p.in_channels()));
    }
    const std::size_t out = p.out_channels(), k = p.kernel(), d = p.dilation;
    const auto taps = split_taps_transposed(p.weight);

    Tensor<T> y({batch, steps, out});
    for (std::size_t b = 0; b < batch; ++b) {
        T* yb = y.ptr() + b * steps * out;
        const T* xb = x.ptr() + b * steps * in;
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t f = 0; f < out; ++f) yb[t * out + f] = p.bias[f];
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t shift = j * d;
            if (shift >= steps) break;
            // y[shift:] += x[:steps-shift] * W_j^T
            blas::gemm_nn(steps - shift, out, in, xb, in, taps.data() + j * out * in, out, yb + shift * out, out,
                          true);
        }
    }

    ConvCache<T> cache;
    cache.x = x;
    cache.weight_shape = p.weight.shape();
    cache.dilation = d;
    return {std::move(y), std::move(cache)};
}

template <class T>
ConvGrads<T> causal_conv1d_backward(const Tensor<T>& dy, const ConvCache<T>& cache, const ConvParams<T>& p) {
    detail::require_train_cache(cache, "causal_conv1d");
    detail::require_same_shape(p.weight.shape(), cache.weight_shape, "causal_conv1d", "weight");
    if (p.dilation != cache.dilation) throw ContractViolation("causal_conv1d backward: dilation changed since forward");
    const auto& x = cache.x;
    const std::size_t batch = x.dim(0), steps = x.dim(1), in = x.dim(2);
    const std::size_t out = p.out_channels(), k = p.kernel(), d = p.dilation;
    detail::require_same_shape(dy.shape(), Shape{batch, steps, out}, "causal_conv1d", "dL/dy");

    const auto taps = split_taps(p.weight);
    std::vector<T> dtaps(out * in * k, T{0});
    ConvGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(p.weight.shape()), Tensor<T>({out})};
    std::vector<T> dyt(out * steps);  // dy[b] transposed, [out x steps]

    for (std::size_t b = 0; b < batch; ++b) {
        const T* dyb = dy.ptr() + b * steps * out;
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t f = 0; f < out; ++f) dyt[f * steps + t] = dyb[t * out + f];
        const T* xb = x.ptr() + b * steps * in;
        T* dxb = g.dx.ptr() + b * steps * in;
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t f = 0; f < out; ++f) g.dbias[f] += dyb[t * out + f];
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t shift = j * d;
            if (shift >= steps) break;
            const std::size_t rows = steps - shift;
            // dx[:rows] += dy[shift:] * W_j
            blas::gemm_nn(rows, in, out, dyb + shift * out, out, taps.data() + j * out * in, in, dxb, in, true);
            // dW_j += dy[shift:]^T * x[:rows]
            blas::gemm_nn(out, in, rows, dyt.data() + shift, steps, xb, in, dtaps.data() + j * out * in, in, true);
        }
    }
    for (std::size_t f = 0; f < out; ++f)
        for (std::size_t c = 0; c < in; ++c)
            for (std::size_t j = 0; j < k; ++j) g.dweight.at(f, c, j) = dtaps[(j * out + f) * in + c];
    return g;
}

template std::pair<Tensor<float>, ConvCache<float>> causal_conv1d_forward(const Tensor<float>&,
                                                                         const ConvParams<float>&);
template std::pair<Tensor<double>, ConvCache<double>> causal_conv1d_forward(const Tensor<double>&,
                                                                           const ConvParams<double>&);
template ConvGrads<float> causal_conv1d_backward(const Tensor<float>&, const ConvCache<float>&,
                                                 const ConvParams<float>&);
template ConvGrads<double> causal_conv1d_backward(const Tensor<double>&, const ConvCache<double>&,
                                                  const ConvParams<double>&);

}  // namespace etlnet
