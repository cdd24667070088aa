#include "etlnet/layers.hpp"
#include "etlnet/ops.hpp"
#include "internal.hpp"

namespace etlnet {

namespace {

template <class T>
T apply(Activation act, T z) {
    switch (act) {
        case Activation::relu: return relu(z);
        case Activation::sigmoid: return sigmoid(z);
        case Activation::none: break;
    }
    return z;
}

// Derivative expressed through the activation output y.
template <class T>
T derivative(Activation act, T y) {
    switch (act) {
        case Activation::relu: return y > T{0} ? T{1} : T{0};
        case Activation::sigmoid: return y * (T{1} - y);
        case Activation::none: break;
    }
    return T{1};
}

}  // namespace

template <class T>
std::pair<Tensor<T>, DenseCache<T>> dense_forward(const Tensor<T>& x, const DenseParams<T>& p, Activation act) {
    require_rank(x.shape(), 2, "dense input");
    require_rank(p.weight.shape(), 2, "dense weight");
    const std::size_t batch = x.dim(0), in = x.dim(1), out = p.weight.dim(0);
    if (p.weight.dim(1) != in || p.bias.size() != out) {
        throw DimensionError("dense: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(p.weight.shape()) + " / bias " + shape_str(p.bias.shape()));
    }
    Tensor<T> y({batch, out});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t f = 0; f < out; ++f) y.at(b, f) = p.bias[f];
    blas::gemm_nt(batch, out, in, x.ptr(), in, p.weight.ptr(), in, y.ptr(), out, true);
    for (auto& v : y.data()) v = apply(act, v);

    DenseCache<T> cache;
    cache.x = x;
    cache.y = y;
    cache.act = act;
    cache.weight_shape = p.weight.shape();
    return {std::move(y), std::move(cache)};
}

template <class T>
DenseGrads<T> dense_backward(const Tensor<T>& dy, const DenseCache<T>& cache, const DenseParams<T>& p) {
    detail::require_train_cache(cache, "dense");
    detail::require_same_shape(p.weight.shape(), cache.weight_shape, "dense", "weight");
    detail::require_same_shape(dy.shape(), cache.y.shape(), "dense", "dL/dy");
    const std::size_t batch = cache.x.dim(0), in = cache.x.dim(1), out = p.weight.dim(0);

    Tensor<T> dz(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) dz[i] = dy[i] * derivative(cache.act, cache.y[i]);

    DenseGrads<T> g{Tensor<T>({batch, in}), Tensor<T>(p.weight.shape()), Tensor<T>({out})};
    blas::gemm_nn(batch, in, out, dz.ptr(), out, p.weight.ptr(), in, g.dx.ptr(), in, false);
    blas::gemm_tn(out, in, batch, dz.ptr(), out, cache.x.ptr(), in, g.dweight.ptr(), in, false);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t f = 0; f < out; ++f) g.dbias[f] += dz.at(b, f);
    return g;
}

template <class T>
std::pair<Tensor<T>, ActivationCache<T>> activation_forward(const Tensor<T>& x, Activation act) {
    ActivationCache<T> cache;
    cache.act = act;
    cache.y = map(x, [act](T z) { return apply(act, z); });
    Tensor<T> y = cache.y;
    return {std::move(y), std::move(cache)};
}

template <class T>
Tensor<T> activation_backward(const Tensor<T>& dy, const ActivationCache<T>& cache) {
    detail::require_train_cache(cache, "activation");
    detail::require_same_shape(dy.shape(), cache.y.shape(), "activation", "dL/dy");
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * derivative(cache.act, cache.y[i]);
    return dx;
}

template <class T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
    require_rank(x.shape(), 3, "global_avg_pool input");
    const std::size_t batch = x.dim(0), steps = x.dim(1), ch = x.dim(2);
    Tensor<T> y({batch, ch});
    const T inv = T{1} / static_cast<T>(steps);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t c = 0; c < ch; ++c) y.at(b, c) += x.at(b, t, c);
        for (std::size_t c = 0; c < ch; ++c) y.at(b, c) *= inv;
    }
    return y;
}

template <class T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, const Shape& input_shape) {
    require_rank(input_shape, 3, "global_avg_pool input");
    const std::size_t batch = input_shape[0], steps = input_shape[1], ch = input_shape[2];
    if (dy.shape() != Shape{batch, ch}) {
        throw ContractViolation("global_avg_pool backward: gradient " + shape_str(dy.shape()) +
                                " does not match input " + shape_str(input_shape));
    }
    Tensor<T> dx(input_shape);
    const T inv = T{1} / static_cast<T>(steps);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t c = 0; c < ch; ++c) dx.at(b, t, c) = dy.at(b, c) * inv;
    return dx;
}

#define ETLNET_INSTANTIATE_DENSE(T)                                                                            \
    template std::pair<Tensor<T>, DenseCache<T>> dense_forward(const Tensor<T>&, const DenseParams<T>&,        \
                                                               Activation);                                   \
    template DenseGrads<T> dense_backward(const Tensor<T>&, const DenseCache<T>&, const DenseParams<T>&);     \
    template std::pair<Tensor<T>, ActivationCache<T>> activation_forward(const Tensor<T>&, Activation);        \
    template Tensor<T> activation_backward(const Tensor<T>&, const ActivationCache<T>&);                      \
    template Tensor<T> global_avg_pool_forward(const Tensor<T>&);                                              \
    template Tensor<T> global_avg_pool_backward(const Tensor<T>&, const Shape&);
ETLNET_INSTANTIATE_DENSE(float)
ETLNET_INSTANTIATE_DENSE(double)
#undef ETLNET_INSTANTIATE_DENSE

}  // namespace etlnet
