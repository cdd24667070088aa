#pragma once

#include <cstddef>
#include <utility>

#include "etlnet/rng.hpp"
#include "etlnet/tensor.hpp"

namespace etlnet {

enum class Mode { train, eval };

// Base for every per-layer forward record. A cache belongs to exactly one
// forward invocation; backward checks that it was produced in train mode and
// matches the parameters it is given.
struct LayerCache {
    virtual ~LayerCache() = default;
    Mode mode = Mode::train;
};

// ---------------------------------------------------------------------------
// Dilated causal convolution
// ---------------------------------------------------------------------------

template <class T>
struct ConvParams {
    Tensor<T> weight;  // [out_ch x in_ch x kernel]
    Tensor<T> bias;    // [out_ch]
    std::size_t dilation = 1;

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t kernel() const { return weight.dim(2); }
};

template <class T>
struct ConvCache : LayerCache {
    Tensor<T> x;
    Shape weight_shape;
    std::size_t dilation = 0;
};

template <class T>
struct ConvGrads {
    Tensor<T> dx, dweight, dbias;
};

// y[b,t,f] = bias[f] + sum_c sum_j w[f,c,j] * x[b, t - j*d, c], zero for t - j*d < 0.
template <class T>
std::pair<Tensor<T>, ConvCache<T>> causal_conv1d_forward(const Tensor<T>& x, const ConvParams<T>& p);

template <class T>
ConvGrads<T> causal_conv1d_backward(const Tensor<T>& dy, const ConvCache<T>& cache, const ConvParams<T>& p);

// ---------------------------------------------------------------------------
// Batch normalization over [B x T x C] (joint batch/time statistics) or [B x C]
// ---------------------------------------------------------------------------

template <class T>
struct BatchNormState {
    Tensor<T> gamma, beta;
    Tensor<T> running_mean, running_var;
    T momentum = T(0.1);
    T epsilon = T(1e-5);

    static BatchNormState identity(std::size_t channels, T momentum = T(0.1), T epsilon = T(1e-5));
    std::size_t channels() const { return gamma.size(); }
};

template <class T>
struct BatchNormCache : LayerCache {
    Tensor<T> xhat;
    std::vector<T> inv_std;
    Shape shape;
};

template <class T>
struct BatchNormGrads {
    Tensor<T> dx, dgamma, dbeta;
};

// Train mode uses batch statistics and folds them into the running estimates
// (running <- (1-m) running + m batch, unbiased batch variance). Eval mode
// uses the running estimates only.
template <class T>
std::pair<Tensor<T>, BatchNormCache<T>> batchnorm_forward(const Tensor<T>& x, BatchNormState<T>& s, Mode mode);

template <class T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& dy, const BatchNormCache<T>& cache,
                                     const BatchNormState<T>& s);

// ---------------------------------------------------------------------------
// Inverted dropout
// ---------------------------------------------------------------------------

template <class T>
struct DropoutCache : LayerCache {
    Tensor<T> mask;  // 0 or 1/(1-rate)
};

template <class T>
std::pair<Tensor<T>, DropoutCache<T>> dropout_forward(const Tensor<T>& x, double rate, Rng& rng, Mode mode);

template <class T>
Tensor<T> dropout_backward(const Tensor<T>& dy, const DropoutCache<T>& cache);

// ---------------------------------------------------------------------------
// LSTM / BiLSTM
// ---------------------------------------------------------------------------

// Gate blocks are stacked along the first axis in the order input, forget,
// output, candidate: rows [0,H) belong to the input gate, [H,2H) to the forget
// gate, and so on.
enum class Gate : std::size_t { input = 0, forget = 1, output = 2, candidate = 3 };

template <class T>
struct LstmParams {
    Tensor<T> w_input;      // [4H x in]
    Tensor<T> w_recurrent;  // [4H x H]
    Tensor<T> bias;         // [4H]

    std::size_t hidden() const { return w_recurrent.dim(1); }
    std::size_t input_size() const { return w_input.dim(1); }

    static LstmParams zeros(std::size_t in, std::size_t hidden);
};

template <class T>
struct LstmCache : LayerCache {
    bool reverse = false;
    Tensor<T> x;       // [B x T x in]
    Tensor<T> gates;   // activated gate values, [B x T x 4H]
    Tensor<T> cell;    // [B x T x H]
    Tensor<T> hidden;  // [B x T x H]
    Shape w_input_shape;
};

template <class T>
struct LstmOutput {
    Tensor<T> h_seq;   // [B x T x H], indexed by input time
    Tensor<T> h_last;  // state after the final consumed step
    LstmCache<T> cache;
};

template <class T>
struct LstmGrads {
    Tensor<T> dx, dw_input, dw_recurrent, dbias;
};

// h0 = c0 = 0. reverse=true consumes t = T-1 ... 0; h_last is the state after index 0.
template <class T>
LstmOutput<T> lstm_forward(const Tensor<T>& x, const LstmParams<T>& p, bool reverse, Mode mode = Mode::train);

// dh_seq may be empty (no gradient flowing into the per-step outputs).
template <class T>
LstmGrads<T> lstm_backward(const Tensor<T>& dh_seq, const Tensor<T>& dh_last, const LstmCache<T>& cache,
                           const LstmParams<T>& p);

template <class T>
struct BiLstmCache : LayerCache {
    LstmCache<T> forward_dir, backward_dir;
    bool sequences = false;
};

template <class T>
struct BiLstmGrads {
    Tensor<T> dx;
    LstmGrads<T> forward_dir, backward_dir;
};

// return_sequences=false: out = concat(h_last fwd, h_last bwd), [B x 2H].
// return_sequences=true: out[b,t] = concat(h fwd at t, h bwd at t), [B x T x 2H].
template <class T>
std::pair<Tensor<T>, BiLstmCache<T>> bilstm_forward(const Tensor<T>& x, const LstmParams<T>& p_fwd,
                                                    const LstmParams<T>& p_bwd, bool return_sequences = false,
                                                    Mode mode = Mode::train);

template <class T>
BiLstmGrads<T> bilstm_backward(const Tensor<T>& dout, const BiLstmCache<T>& cache, const LstmParams<T>& p_fwd,
                               const LstmParams<T>& p_bwd);

// ---------------------------------------------------------------------------
// Dense + activations
// ---------------------------------------------------------------------------

enum class Activation { none, relu, sigmoid };

template <class T>
struct DenseParams {
    Tensor<T> weight;  // [out x in]
    Tensor<T> bias;    // [out]
};

template <class T>
struct DenseCache : LayerCache {
    Tensor<T> x;
    Tensor<T> y;  // post-activation
    Activation act = Activation::none;
    Shape weight_shape;
};

template <class T>
struct DenseGrads {
    Tensor<T> dx, dweight, dbias;
};

template <class T>
std::pair<Tensor<T>, DenseCache<T>> dense_forward(const Tensor<T>& x, const DenseParams<T>& p, Activation act);

template <class T>
DenseGrads<T> dense_backward(const Tensor<T>& dy, const DenseCache<T>& cache, const DenseParams<T>& p);

template <class T>
struct ActivationCache : LayerCache {
    Tensor<T> y;
    Activation act = Activation::none;
};

template <class T>
std::pair<Tensor<T>, ActivationCache<T>> activation_forward(const Tensor<T>& x, Activation act);

template <class T>
Tensor<T> activation_backward(const Tensor<T>& dy, const ActivationCache<T>& cache);

// ---------------------------------------------------------------------------
// Global average pooling over time: [B x T x C] -> [B x C]
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x);

template <class T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, const Shape& input_shape);

}  // namespace etlnet
