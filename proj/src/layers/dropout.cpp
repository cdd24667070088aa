#include "etlnet/layers.hpp"
#include "internal.hpp"

namespace etlnet {

template <class T>
std::pair<Tensor<T>, DropoutCache<T>> dropout_forward(const Tensor<T>& x, double rate, Rng& rng, Mode mode) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ArgumentError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    }
    DropoutCache<T> cache;
    cache.mode = mode;
    if (mode == Mode::eval) return {x, std::move(cache)};

    cache.mask = Tensor<T>(x.shape(), T{1});
    Tensor<T> y = x;
    if (rate > 0.0) {
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
        for (std::size_t i = 0; i < x.size(); ++i) {
            const T m = rng.uniform() < rate ? T{0} : keep_scale;
            cache.mask[i] = m;
            y[i] = x[i] * m;
        }
    }
    return {std::move(y), std::move(cache)};
}

template <class T>
Tensor<T> dropout_backward(const Tensor<T>& dy, const DropoutCache<T>& cache) {
    detail::require_train_cache(cache, "dropout");
    detail::require_same_shape(dy.shape(), cache.mask.shape(), "dropout", "dL/dy");
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * cache.mask[i];
    return dx;
}

template std::pair<Tensor<float>, DropoutCache<float>> dropout_forward(const Tensor<float>&, double, Rng&, Mode);
template std::pair<Tensor<double>, DropoutCache<double>> dropout_forward(const Tensor<double>&, double, Rng&, Mode);
template Tensor<float> dropout_backward(const Tensor<float>&, const DropoutCache<float>&);
template Tensor<double> dropout_backward(const Tensor<double>&, const DropoutCache<double>&);

}  // namespace etlnet
