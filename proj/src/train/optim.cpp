#include <algorithm>
#include <cmath>

#include "etlnet/train.hpp"

namespace etlnet {

template <class T>
LossResult<T> bce_loss(const Tensor<T>& p, const Tensor<T>& y) {
    const bool column = p.rank() == 2 && p.dim(1) == 1;
    if (!(column || p.rank() == 1) || y.rank() != 1 || p.dim(0) != y.dim(0)) {
        throw DimensionError("bce_loss: predictions " + shape_str(p.shape()) + " do not match labels " +
                             shape_str(y.shape()));
    }
    const std::size_t n = y.size();
    if (n == 0) throw ArgumentError("bce_loss: empty batch");
    LossResult<T> out;
    out.grad = Tensor<T>(p.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double raw = static_cast<double>(p[i]);
        const double q = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
        const double t = static_cast<double>(y[i]);
        total -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
        // The clamp is flat outside its range, so the gradient vanishes there.
        const bool clamped = raw < kProbClamp || raw > 1.0 - kProbClamp;
        out.grad[i] = clamped ? T{0} : static_cast<T>((q - t) / (q * (1.0 - q)) / static_cast<double>(n));
    }
    out.loss = total / static_cast<double>(n);
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("train.lr must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ArgumentError("train.beta1 must be in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ArgumentError("train.beta2 must be in (0, 1)");
    if (!(adam_epsilon > 0.0)) throw ArgumentError("train.adam_epsilon must be > 0");
    if (batch_size < 1) throw ArgumentError("train.batch_size must be >= 1");
    if (early_stop_patience && *early_stop_patience < 1) throw ArgumentError("train.patience must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ArgumentError("train.threshold must be in [0, 1]");
}

template <class T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const TrainConfig& cfg) {
    if (params.size() != grads.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                             std::to_string(grads.size()) + " gradients");
    }
    if (state.t == 0 && state.m.empty()) {
        for (const auto* p : params) {
            state.m.push_back(Tensor<T>::zeros_like(*p));
            state.v.push_back(Tensor<T>::zeros_like(*p));
        }
    }
    if (state.m.size() != params.size()) throw DimensionError("adam_step: optimizer state has a different layout");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i].shape() || state.m[i].shape() != grads[i].shape()) {
            throw DimensionError("adam_step: parameter " + shape_str(params[i]->shape()) + " vs gradient " +
                                 shape_str(grads[i].shape()));
        }
    }
    state.t += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        T* w = params[i]->ptr();
        T* m = state.m[i].ptr();
        T* v = state.v[i].ptr();
        const T* g = grads[i].ptr();
        for (std::size_t j = 0; j < grads[i].size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
            const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double step = cfg.learning_rate * (mj / c1) / (std::sqrt(vj / c2) + cfg.adam_epsilon);
            w[j] = static_cast<T>(static_cast<double>(w[j]) - step);
        }
    }
}

template LossResult<float> bce_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> bce_loss(const Tensor<double>&, const Tensor<double>&);
template void adam_step(const std::vector<Tensor<float>*>&, const std::vector<Tensor<float>>&, AdamState<float>&,
                        const TrainConfig&);
template void adam_step(const std::vector<Tensor<double>*>&, const std::vector<Tensor<double>>&, AdamState<double>&,
                        const TrainConfig&);

}  // namespace etlnet
