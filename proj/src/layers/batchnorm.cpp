#include <cmath>

#include "etlnet/layers.hpp"
#include "internal.hpp"

namespace etlnet {

template <class T>
BatchNormState<T> BatchNormState<T>::identity(std::size_t channels, T momentum, T epsilon) {
    BatchNormState s;
    s.gamma = Tensor<T>({channels}, T{1});
    s.beta = Tensor<T>({channels}, T{0});
    s.running_mean = Tensor<T>({channels}, T{0});
    s.running_var = Tensor<T>({channels}, T{1});
    s.momentum = momentum;
    s.epsilon = epsilon;
    return s;
}

template <class T>
std::pair<Tensor<T>, BatchNormCache<T>> batchnorm_forward(const Tensor<T>& x, BatchNormState<T>& s, Mode mode) {
    if (x.rank() != 2 && x.rank() != 3) {
        throw DimensionError("batchnorm: expected [B x C] or [B x T x C], got " + shape_str(x.shape()));
    }
    const std::size_t ch = x.shape().back();
    if (ch != s.channels()) {
        throw DimensionError("batchnorm: input " + shape_str(x.shape()) + " has " + std::to_string(ch) +
                             " channels, state has " + std::to_string(s.channels()));
    }
    const std::size_t rows = x.size() / ch;

    BatchNormCache<T> cache;
    cache.mode = mode;
    cache.shape = x.shape();
    cache.inv_std.assign(ch, T{0});
    Tensor<T> xhat(x.shape());

    if (mode == Mode::train) {
        if (rows < 2) {
            throw ArgumentError("batchnorm: train mode needs at least 2 samples per channel, got " +
                                std::to_string(rows));
        }
        std::vector<T> mean(ch, T{0}), var(ch, T{0});
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ch; ++c) mean[c] += x[r * ch + c];
        for (auto& m : mean) m /= static_cast<T>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ch; ++c) {
                const T dv = x[r * ch + c] - mean[c];
                var[c] += dv * dv;
            }
        for (std::size_t c = 0; c < ch; ++c) {
            const T biased = var[c] / static_cast<T>(rows);
            const T unbiased = var[c] / static_cast<T>(rows - 1);
            cache.inv_std[c] = T{1} / std::sqrt(biased + s.epsilon);
            s.running_mean[c] = (T{1} - s.momentum) * s.running_mean[c] + s.momentum * mean[c];
            s.running_var[c] = (T{1} - s.momentum) * s.running_var[c] + s.momentum * unbiased;
        }
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ch; ++c) xhat[r * ch + c] = (x[r * ch + c] - mean[c]) * cache.inv_std[c];
    } else {
        for (std::size_t c = 0; c < ch; ++c) cache.inv_std[c] = T{1} / std::sqrt(s.running_var[c] + s.epsilon);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ch; ++c)
                xhat[r * ch + c] = (x[r * ch + c] - s.running_mean[c]) * cache.inv_std[c];
    }

    Tensor<T> y(x.shape());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) y[r * ch + c] = s.gamma[c] * xhat[r * ch + c] + s.beta[c];
    cache.xhat = std::move(xhat);
    return {std::move(y), std::move(cache)};
}

template <class T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& dy, const BatchNormCache<T>& cache,
                                     const BatchNormState<T>& s) {
    detail::require_train_cache(cache, "batchnorm");
    detail::require_same_shape(dy.shape(), cache.shape, "batchnorm", "dL/dy");
    const std::size_t ch = cache.shape.back();
    if (ch != s.channels()) throw ContractViolation("batchnorm backward: state channel count changed since forward");
    const std::size_t rows = dy.size() / ch;
    const auto& xhat = cache.xhat;

    BatchNormGrads<T> g{Tensor<T>(dy.shape()), Tensor<T>({ch}), Tensor<T>({ch})};
    std::vector<T> sum_dxhat(ch, T{0}), sum_dxhat_xhat(ch, T{0});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) {
            const T d = dy[r * ch + c];
            g.dbeta[c] += d;
            g.dgamma[c] += d * xhat[r * ch + c];
            const T dxh = d * s.gamma[c];
            sum_dxhat[c] += dxh;
            sum_dxhat_xhat[c] += dxh * xhat[r * ch + c];
        }
    const T n = static_cast<T>(rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) {
            const T dxh = dy[r * ch + c] * s.gamma[c];
            g.dx[r * ch + c] =
                cache.inv_std[c] / n * (n * dxh - sum_dxhat[c] - xhat[r * ch + c] * sum_dxhat_xhat[c]);
        }
    return g;
}

template struct BatchNormState<float>;
template struct BatchNormState<double>;
template std::pair<Tensor<float>, BatchNormCache<float>> batchnorm_forward(const Tensor<float>&,
                                                                          BatchNormState<float>&, Mode);
template std::pair<Tensor<double>, BatchNormCache<double>> batchnorm_forward(const Tensor<double>&,
                                                                            BatchNormState<double>&, Mode);
template BatchNormGrads<float> batchnorm_backward(const Tensor<float>&, const BatchNormCache<float>&,
                                                  const BatchNormState<float>&);
template BatchNormGrads<double> batchnorm_backward(const Tensor<double>&, const BatchNormCache<double>&,
                                                   const BatchNormState<double>&);

}  // namespace etlnet
