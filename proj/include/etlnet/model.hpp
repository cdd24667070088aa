#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "etlnet/layers.hpp"
#include "etlnet/rng.hpp"
#include "etlnet/tensor.hpp"

namespace etlnet {

enum class VariantName {
    etlnet,
    bilstm3,
    tcn3,
    single_tcn,
    dual_tcn,
    reduced_feature,
    lstm_replacement,
    triple_tcn_bilstm,
};

std::string_view to_string(VariantName v);
VariantName parse_variant(std::string_view text);
const std::vector<VariantName>& all_variants();

// The six models compared in the ablation grid (base model first).
const std::vector<VariantName>& ablation_variants();

struct ModelConfig {
    VariantName variant = VariantName::etlnet;
    std::size_t in_features = 7;
    std::size_t window = 300;
    std::size_t tcn_filters = 64;
    std::size_t kernel = 3;
    // TCN layer i uses dilations[i % dilations.size()].
    std::vector<std::size_t> dilations{1};
    std::size_t lstm_hidden = 128;
    std::size_t dense_hidden = 64;
    double dropout_rate = 0.3;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;

    void validate() const;  // throws ArgumentError
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Defaults for a variant; reduced_feature drops the three gyroscope channels.
ModelConfig default_config(VariantName v);

// Flat "model.<field>" key/value view used by checkpoints and run configs.
std::map<std::string, std::string> model_config_to_kv(const ModelConfig& cfg);
ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv, ModelConfig base = {});

enum class LayerKind { tcn, batchnorm, dropout, bilstm, lstm, global_avg_pool, dense };
std::string_view to_string(LayerKind k);

// Declarative description of one layer in the stack.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 1;
    std::size_t dilation = 1;
    bool residual = false;
    bool return_sequences = false;
    Activation act = Activation::none;
    double rate = 0.0;
};

struct ParamCount {
    std::uint64_t trainable = 0;
    std::uint64_t total = 0;
    friend bool operator==(const ParamCount&, const ParamCount&) = default;
};

std::vector<LayerSpec> architecture(const ModelConfig& cfg);
ParamCount count_params(const LayerSpec& spec);
ParamCount count_params(const ModelConfig& cfg);

struct VariantInfo {
    VariantName name;
    std::string description;
    ModelConfig config;
};

std::vector<VariantInfo> variant_catalog();

template <class T>
struct ParamRef {
    std::string name;
    Tensor<T>* tensor = nullptr;
    bool trainable = true;
};

template <class T>
struct ConstParamRef {
    std::string name;
    const Tensor<T>* tensor = nullptr;
    bool trainable = true;
};

template <class T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual const LayerSpec& spec() const = 0;
    LayerKind kind() const { return spec().kind; }

    // Train-mode forward may update internal statistics (batch norm) and
    // draws from rng (dropout). Eval mode mutates nothing.
    virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng, std::unique_ptr<LayerCache>& cache) = 0;

    // Appends gradients for each trainable tensor, in params() order.
    virtual Tensor<T> backward(const Tensor<T>& dy, const LayerCache& cache, std::vector<Tensor<T>>& grads) const = 0;

    virtual std::vector<ParamRef<T>> params() = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;

    ParamCount count() const { return count_params(spec()); }
};

template <class T>
class Model {
public:
    struct ForwardPass {
        Tensor<T> probs;  // [B x 1]
        std::vector<std::unique_ptr<LayerCache>> caches;
        Mode mode = Mode::eval;
    };

    Model(ModelConfig cfg, std::vector<std::unique_ptr<Layer<T>>> layers);
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const ModelConfig& config() const { return cfg_; }
    std::size_t num_layers() const { return layers_.size(); }
    const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }
    std::vector<LayerKind> layer_kinds() const;

    // x: [B x window x in_features].
    ForwardPass forward(const Tensor<T>& x, Mode mode, Rng& rng);

    // Eval-mode forward; never mutates the model.
    Tensor<T> predict(const Tensor<T>& x) const;

    // Gradients of every trainable tensor, aligned with trainable_parameters().
    std::vector<Tensor<T>> backward(const Tensor<T>& dprobs, const ForwardPass& pass) const;

    // Every tensor (weights, biases, batch-norm running statistics).
    std::vector<ParamRef<T>> parameters();
    std::vector<ConstParamRef<T>> parameters() const;
    std::vector<Tensor<T>*> trainable_parameters();

    // Closed-form count from the layer specs.
    ParamCount count_params() const;

private:
    void check_input(const Tensor<T>& x) const;

    ModelConfig cfg_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <class T>
Model<T> build_model(const ModelConfig& cfg, Rng& rng);

// Binary checkpoint: "ETLN", u32 version, config block, then each tensor as
// (name, shape, little-endian f32 values).
template <class T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model);

template <class T>
Model<T> load_checkpoint(const std::filesystem::path& path);

ModelConfig read_checkpoint_config(const std::filesystem::path& path);

}  // namespace etlnet
