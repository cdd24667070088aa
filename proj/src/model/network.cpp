#include <cmath>

#include "etlnet/model.hpp"
#include "etlnet/ops.hpp"

namespace etlnet {

namespace {

template <class Cache>
const Cache& cache_as(const LayerCache& cache, const char* layer) {
    const auto* typed = dynamic_cast<const Cache*>(&cache);
    if (typed == nullptr) throw ContractViolation(std::string(layer) + " backward received a cache of another layer");
    return *typed;
}

template <class T>
Tensor<T> glorot(Rng& rng, Shape shape, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return rng_uniform<T>(rng, std::move(shape), static_cast<T>(-limit), static_cast<T>(limit));
}

template <class T>
LstmParams<T> init_lstm(Rng& rng, std::size_t in, std::size_t hid) {
    auto p = LstmParams<T>::zeros(in, hid);
    for (std::size_t gate = 0; gate < 4; ++gate) {
        auto w = glorot<T>(rng, {hid, in}, in, hid);
        auto u = glorot<T>(rng, {hid, hid}, hid, hid);
        std::copy(w.data().begin(), w.data().end(), p.w_input.ptr() + gate * hid * in);
        std::copy(u.data().begin(), u.data().end(), p.w_recurrent.ptr() + gate * hid * hid);
    }
    for (std::size_t u = 0; u < hid; ++u) p.bias[static_cast<std::size_t>(Gate::forget) * hid + u] = T{1};
    return p;
}

template <class T>
struct TcnCache : LayerCache {
    ConvCache<T> conv;
    Tensor<T> activated;  // relu(conv(x)), before the residual add
};

// Dilated causal conv -> ReLU, plus identity residual when in == out channels.
template <class T>
class TcnLayer final : public Layer<T> {
public:
    TcnLayer(LayerSpec spec, ConvParams<T> p) : spec_(spec), p_(std::move(p)) {}

    const LayerSpec& spec() const override { return spec_; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng&, std::unique_ptr<LayerCache>& cache) override {
        auto [z, conv_cache] = causal_conv1d_forward(x, p_);
        for (auto& v : z.data()) v = relu(v);
        Tensor<T> y = z;
        if (spec_.residual) {
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
        }
        auto c = std::make_unique<TcnCache<T>>();
        c->mode = mode;
        c->conv = std::move(conv_cache);
        c->conv.mode = mode;
        c->activated = std::move(z);
        cache = std::move(c);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const LayerCache& cache, std::vector<Tensor<T>>& grads) const override {
        const auto& c = cache_as<TcnCache<T>>(cache, "tcn");
        Tensor<T> dz(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i) dz[i] = c.activated[i] > T{0} ? dy[i] : T{0};
        auto g = causal_conv1d_backward(dz, c.conv, p_);
        if (spec_.residual) {
            for (std::size_t i = 0; i < dy.size(); ++i) g.dx[i] += dy[i];
        }
        grads.push_back(std::move(g.dweight));
        grads.push_back(std::move(g.dbias));
        return std::move(g.dx);
    }

    std::vector<ParamRef<T>> params() override {
        return {{"tcn.weight", &p_.weight, true}, {"tcn.bias", &p_.bias, true}};
    }

    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<TcnLayer>(*this); }

private:
    LayerSpec spec_;
    ConvParams<T> p_;
};

template <class T>
struct BatchNormLayerCache : LayerCache {
    BatchNormCache<T> bn;
};

template <class T>
class BatchNormLayer final : public Layer<T> {
public:
    BatchNormLayer(LayerSpec spec, BatchNormState<T> s) : spec_(spec), s_(std::move(s)) {}

    const LayerSpec& spec() const override { return spec_; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng&, std::unique_ptr<LayerCache>& cache) override {
        auto [y, bn] = batchnorm_forward(x, s_, mode);
        auto c = std::make_unique<BatchNormLayerCache<T>>();
        c->mode = mode;
        c->bn = std::move(bn);
        cache = std::move(c);
        return std::move(y);
    }

    Tensor<T> backward(const Tensor<T>& dy, const LayerCache& cache, std::vector<Tensor<T>>& grads) const override {
        const auto& c = cache_as<BatchNormLayerCache<T>>(cache, "batchnorm");
        auto g = batchnorm_backward(dy, c.bn, s_);
        grads.push_back(std::move(g.dgamma));
        grads.push_back(std::move(g.dbeta));
        return std::move(g.dx);
    }

    std::vector<ParamRef<T>> params() override {
        return {{"batchnorm.gamma", &s_.gamma, true},
                {"batchnorm.beta", &s_.beta, true},
                {"batchnorm.running_mean", &s_.running_mean, false},
                {"batchnorm.running_var", &s_.running_var, false}};
    }

    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNormLayer>(*this); }

private:
    LayerSpec spec_;
    BatchNormState<T> s_;
};

template <class T>
struct DropoutLayerCache : LayerCache {
    DropoutCache<T> dropout;
};

template <class T>
class DropoutLayer final : public Layer<T> {
public:
    explicit DropoutLayer(LayerSpec spec) : spec_(spec) {}

    const LayerSpec& spec() const override { return spec_; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng, std::unique_ptr<LayerCache>& cache) override {
        auto [y, d] = dropout_forward(x, spec_.rate, rng, mode);
        auto c = std::make_unique<DropoutLayerCache<T>>();
        c->mode = mode;
        c->dropout = std::move(d);
        cache = std::move(c);
        return std::move(y);
    }

    Tensor<T> backward(const Tensor<T>& dy, const LayerCache& cache, std::vector<Tensor<T>>&) const override {
        return dropout_backward(dy, cache_as<DropoutLayerCache<T>>(cache, "dropout").dropout);
    }

    std::vector<ParamRef<T>> params() override { return {}; }
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<DropoutLayer>(*this); }

private:
    LayerSpec spec_;
};

template <class T>
struct BiLstmLayerCache : LayerCache {
    BiLstmCache<T> lstm;
};

template <class T>
class BiLstmLayer final : public Layer<T> {
public:
    BiLstmLayer(LayerSpec spec, LstmParams<T> fwd, LstmParams<T> bwd)
        : spec_(spec), fwd_(std::move(fwd)), bwd_(std::move(bwd)) {}

    const LayerSpec& spec() const override { return spec_; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng&, std::unique_ptr<LayerCache>& cache) override {
        auto [y, lc] = bilstm_forward(x, fwd_, bwd_, spec_.return_sequences, mode);
        auto c = std::make_unique<BiLstmLayerCache<T>>();
        c->mode = mode;
        c->lstm = std::move(lc);
        cache = std::move(c);
        return std::move(y);
    }

    Tensor<T> backward(const Tensor<T>& dy, const LayerCache& cache, std::vector<Tensor<T>>& grads) const override {
        auto g = bilstm_backward(dy, cache_as<BiLstmLayerCache<T>>(cache, "bilstm").lstm, fwd_, bwd_);
        grads.push_back(std::move(g.forward_dir.dw_input));
        grads.push_back(std::move(g.forward_dir.dw_recurrent));
        grads.push_back(std::move(g.forward_dir.dbias));
        grads.push_back(std::move(g.backward_dir.dw_input));
        grads.push_back(std::move(g.backward_dir.dw_recurrent));
        grads.push_back(std::move(g.backward_dir.dbias));
        return std::move(g.dx);
    }

    std::vector<ParamRef<T>> params() override {
        return {{"bilstm.fwd.w_input", &fwd_.w_input, true},     {"bilstm.fwd.w_recurrent", &fwd_.w_recurrent, true},
                {"bilstm.fwd.bias", &fwd_.bias, true},           {"bilstm.bwd.w_input", &bwd_.w_input, true},
                {"bilstm.bwd.w_recurrent", &bwd_.w_recurrent, true}, {"bilstm.bwd.bias", &bwd_.bias, true}};
    }

    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BiLstmLayer>(*this); }

private:
    LayerSpec spec_;
    LstmParams<T> fwd_, bwd_;
};

template <class T>
struct LstmLayerCache : LayerCache {
    LstmCache<T> lstm;
};

// Unidirectional LSTM emitting its final hidden state.
template <class T>
class LstmLayer final : public Layer<T> {
public:
    LstmLayer(LayerSpec spec, LstmParams<T> p) : spec_(spec), p_(std::move(p)) {}

    const LayerSpec& spec() const override { return spec_; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng&, std::unique_ptr<LayerCache>& cache) override {
        auto out = lstm_forward(x, p_, false, mode);
        auto c = std::make_unique<LstmLayerCache<T>>();
        c->mode = mode;
        c->lstm = std::move(out.cache);
        cache = std::move(c);
        return std::move(out.h_last);
    }

    Tensor<T> backward(const Tensor<T>& dy, const LayerCache& cache, std::vector<Tensor<T>>& grads) const override {
        auto g = lstm_backward(Tensor<T>{}, dy, cache_as<LstmLayerCache<T>>(cache, "lstm").lstm, p_);
        grads.push_back(std::move(g.dw_input));
        grads.push_back(std::move(g.dw_recurrent));
        grads.push_back(std::move(g.dbias));
        return std::move(g.dx);
    }

    std::vector<ParamRef<T>> params() override {
        return {{"lstm.w_input", &p_.w_input, true},
                {"lstm.w_recurrent", &p_.w_recurrent, true},
                {"lstm.bias", &p_.bias, true}};
    }

    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LstmLayer>(*this); }

private:
    LayerSpec spec_;
    LstmParams<T> p_;
};

struct PoolCache : LayerCache {
    Shape input_shape;
};

template <class T>
class GlobalAvgPoolLayer final : public Layer<T> {
public:
    explicit GlobalAvgPoolLayer(LayerSpec spec) : spec_(spec) {}

    const LayerSpec& spec() const override { return spec_; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng&, std::unique_ptr<LayerCache>& cache) override {
        auto c = std::make_unique<PoolCache>();
        c->mode = mode;
        c->input_shape = x.shape();
        cache = std::move(c);
        return global_avg_pool_forward(x);
    }

    Tensor<T> backward(const Tensor<T>& dy, const LayerCache& cache, std::vector<Tensor<T>>&) const override {
        const auto& c = cache_as<PoolCache>(cache, "global_avg_pool");
        if (c.mode != Mode::train) throw ContractViolation("global_avg_pool backward received an eval-mode cache");
        return global_avg_pool_backward(dy, c.input_shape);
    }

    std::vector<ParamRef<T>> params() override { return {}; }
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPoolLayer>(*this); }

private:
    LayerSpec spec_;
};

template <class T>
struct DenseLayerCache : LayerCache {
    DenseCache<T> dense;
};

template <class T>
class DenseLayer final : public Layer<T> {
public:
    DenseLayer(LayerSpec spec, DenseParams<T> p) : spec_(spec), p_(std::move(p)) {}

    const LayerSpec& spec() const override { return spec_; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng&, std::unique_ptr<LayerCache>& cache) override {
        auto [y, dc] = dense_forward(x, p_, spec_.act);
        auto c = std::make_unique<DenseLayerCache<T>>();
        c->mode = mode;
        c->dense = std::move(dc);
        c->dense.mode = mode;
        cache = std::move(c);
        return std::move(y);
    }

    Tensor<T> backward(const Tensor<T>& dy, const LayerCache& cache, std::vector<Tensor<T>>& grads) const override {
        auto g = dense_backward(dy, cache_as<DenseLayerCache<T>>(cache, "dense").dense, p_);
        grads.push_back(std::move(g.dweight));
        grads.push_back(std::move(g.dbias));
        return std::move(g.dx);
    }

    std::vector<ParamRef<T>> params() override {
        return {{"dense.weight", &p_.weight, true}, {"dense.bias", &p_.bias, true}};
    }

    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<DenseLayer>(*this); }

private:
    LayerSpec spec_;
    DenseParams<T> p_;
};

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& s, const ModelConfig& cfg, Rng& rng) {
    switch (s.kind) {
        case LayerKind::tcn: {
            ConvParams<T> p{glorot<T>(rng, {s.out, s.in, s.kernel}, s.in * s.kernel, s.out * s.kernel),
                            Tensor<T>({s.out}), s.dilation};
            return std::make_unique<TcnLayer<T>>(s, std::move(p));
        }
        case LayerKind::batchnorm:
            return std::make_unique<BatchNormLayer<T>>(
                s, BatchNormState<T>::identity(s.out, static_cast<T>(cfg.bn_momentum), static_cast<T>(cfg.bn_epsilon)));
        case LayerKind::dropout: return std::make_unique<DropoutLayer<T>>(s);
        case LayerKind::bilstm: {
            auto fwd = init_lstm<T>(rng, s.in, s.out / 2);
            auto bwd = init_lstm<T>(rng, s.in, s.out / 2);
            return std::make_unique<BiLstmLayer<T>>(s, std::move(fwd), std::move(bwd));
        }
        case LayerKind::lstm: return std::make_unique<LstmLayer<T>>(s, init_lstm<T>(rng, s.in, s.out));
        case LayerKind::global_avg_pool: return std::make_unique<GlobalAvgPoolLayer<T>>(s);
        case LayerKind::dense:
            return std::make_unique<DenseLayer<T>>(
                s, DenseParams<T>{glorot<T>(rng, {s.out, s.in}, s.in, s.out), Tensor<T>({s.out})});
    }
    throw ArgumentError("unknown layer kind");
}

}  // namespace

template <class T>
Model<T>::Model(ModelConfig cfg, std::vector<std::unique_ptr<Layer<T>>> layers)
    : cfg_(std::move(cfg)), layers_(std::move(layers)) {}

template <class T>
Model<T>::Model(const Model& other) : cfg_(other.cfg_) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <class T>
Model<T>& Model<T>::operator=(const Model& other) {
    if (this != &other) *this = Model(other);
    return *this;
}

template <class T>
std::vector<LayerKind> Model<T>::layer_kinds() const {
    std::vector<LayerKind> kinds;
    for (const auto& l : layers_) kinds.push_back(l->kind());
    return kinds;
}

template <class T>
void Model<T>::check_input(const Tensor<T>& x) const {
    if (x.rank() != 3 || x.dim(1) != cfg_.window || x.dim(2) != cfg_.in_features) {
        throw DimensionError("model expects input [B x " + std::to_string(cfg_.window) + " x " +
                             std::to_string(cfg_.in_features) + "], got " + shape_str(x.shape()));
    }
}

template <class T>
typename Model<T>::ForwardPass Model<T>::forward(const Tensor<T>& x, Mode mode, Rng& rng) {
    check_input(x);
    ForwardPass pass;
    pass.mode = mode;
    pass.caches.resize(layers_.size());
    Tensor<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, mode, rng, pass.caches[i]);
    pass.probs = std::move(h);
    return pass;
}

template <class T>
Tensor<T> Model<T>::predict(const Tensor<T>& x) const {
    check_input(x);
    Rng unused(0);
    std::unique_ptr<LayerCache> cache;
    Tensor<T> h = x;
    // Eval-mode forward touches no layer state.
    for (const auto& l : layers_) h = const_cast<Layer<T>&>(*l).forward(h, Mode::eval, unused, cache);
    return h;
}

template <class T>
std::vector<Tensor<T>> Model<T>::backward(const Tensor<T>& dprobs, const ForwardPass& pass) const {
    if (pass.mode != Mode::train) throw ContractViolation("model backward requires a train-mode forward pass");
    if (pass.caches.size() != layers_.size()) throw ContractViolation("forward pass does not belong to this model");
    std::vector<std::vector<Tensor<T>>> per_layer(layers_.size());
    Tensor<T> d = dprobs;
    for (std::size_t i = layers_.size(); i-- > 0;) d = layers_[i]->backward(d, *pass.caches[i], per_layer[i]);
    std::vector<Tensor<T>> grads;
    for (auto& lg : per_layer)
        for (auto& g : lg) grads.push_back(std::move(g));
    return grads;
}

template <class T>
std::vector<ParamRef<T>> Model<T>::parameters() {
    std::vector<ParamRef<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto& p : layers_[i]->params()) {
            p.name = "L" + std::to_string(i) + "." + p.name;
            out.push_back(std::move(p));
        }
    }
    return out;
}

template <class T>
std::vector<ConstParamRef<T>> Model<T>::parameters() const {
    std::vector<ConstParamRef<T>> out;
    for (auto& p : const_cast<Model&>(*this).parameters()) out.push_back({p.name, p.tensor, p.trainable});
    return out;
}

template <class T>
std::vector<Tensor<T>*> Model<T>::trainable_parameters() {
    std::vector<Tensor<T>*> out;
    for (auto& p : parameters())
        if (p.trainable) out.push_back(p.tensor);
    return out;
}

template <class T>
ParamCount Model<T>::count_params() const {
    ParamCount total;
    for (const auto& l : layers_) {
        const auto c = l->count();
        total.trainable += c.trainable;
        total.total += c.total;
    }
    return total;
}

template <class T>
Model<T> build_model(const ModelConfig& cfg, Rng& rng) {
    std::vector<std::unique_ptr<Layer<T>>> layers;
    for (const auto& spec : architecture(cfg)) layers.push_back(make_layer<T>(spec, cfg, rng));
    return Model<T>(cfg, std::move(layers));
}

template class Model<float>;
template class Model<double>;
template Model<float> build_model<float>(const ModelConfig&, Rng&);
template Model<double> build_model<double>(const ModelConfig&, Rng&);

}  // namespace etlnet
