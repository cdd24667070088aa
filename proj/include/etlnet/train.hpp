#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "etlnet/dataio.hpp"
#include "etlnet/model.hpp"

namespace etlnet {

// ---------------------------------------------------------------------------
// Loss and optimizer
// ---------------------------------------------------------------------------

inline constexpr double kProbClamp = 1e-7;

template <class T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad;  // dL/dp, same shape as p
};

// Mean binary cross-entropy. p: [B x 1] (or [B]), y: [B] with values in {0,1}.
template <class T>
LossResult<T> bce_loss(const Tensor<T>& p, const Tensor<T>& y);

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    bool shuffle = true;
    std::optional<std::size_t> early_stop_patience;  // epochs without val F1 improvement
    double threshold = 0.5;

    void validate() const;  // throws ArgumentError
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

template <class T>
struct AdamState {
    std::vector<Tensor<T>> m, v;
    std::uint64_t t = 0;
};

// One Adam update with bias correction. State is lazily sized on the first step.
template <class T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::uint64_t total() const { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    ConfusionMatrix confusion;
    double threshold = 0.5;
    // Set when the denominator was zero; the value is then reported as 0.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

double f1_score(double precision, double recall);
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, double threshold = 0.5);
ConfusionMatrix confusion_matrix(const std::vector<std::uint8_t>& labels, const std::vector<std::uint8_t>& preds);
MetricsReport compute_metrics(const std::vector<std::uint8_t>& labels, const std::vector<double>& probs,
                              double threshold = 0.5);

// Window probabilities in eval mode, in batches.
template <class T>
std::vector<double> predict_windows(const Model<T>& model, const WindowSet& ws, std::size_t batch_size = 256);

template <class T>
MetricsReport evaluate(const Model<T>& model, const WindowSet& ws, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    MetricsReport val;
    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    bool stopped_early = false;
    std::vector<std::string> warnings;
};

// [B x W x C] batch from the given window indices.
template <class T>
Tensor<T> gather_batch(const WindowSet& ws, const std::vector<std::size_t>& indices, std::size_t begin,
                       std::size_t end, Tensor<T>* labels = nullptr);

// Fits model in place. Epoch e shuffles and draws dropout masks from
// Rng(derive_seed(cfg.seed, e)).
template <class T>
TrainResult train(Model<T>& model, const WindowSet& train_ws, const WindowSet& val_ws, const TrainConfig& cfg);

std::string history_csv(const std::vector<EpochRecord>& history);
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace etlnet
