#include <fstream>
#include <numeric>

#include "../common/text.hpp"
#include "etlnet/train.hpp"

namespace etlnet {

template <class T>
Tensor<T> gather_batch(const WindowSet& ws, const std::vector<std::size_t>& indices, std::size_t begin,
                       std::size_t end, Tensor<T>* labels) {
    const std::size_t per = ws.window * ws.channels();
    Tensor<T> x({end - begin, ws.window, ws.channels()});
    if (labels) *labels = Tensor<T>({end - begin});
    for (std::size_t i = begin; i < end; ++i) {
        const float* src = ws.x.ptr() + indices[i] * per;
        std::copy(src, src + per, x.ptr() + (i - begin) * per);
        if (labels) (*labels)[i - begin] = static_cast<T>(ws.y[indices[i]]);
    }
    return x;
}

namespace {

void check_windows(const ModelConfig& mc, const WindowSet& ws, const char* which) {
    if (ws.size() == 0) throw ArgumentError(std::string(which) + " window set is empty");
    if (ws.window != mc.window) {
        throw DimensionError(std::string(which) + " windows have length " + std::to_string(ws.window) +
                             " but the model expects window " + std::to_string(mc.window));
    }
    if (ws.channels() != mc.in_features) {
        throw DimensionError(std::string(which) + " windows have " + std::to_string(ws.channels()) +
                             " channels but the model expects " + std::to_string(mc.in_features));
    }
}

}  // namespace

template <class T>
TrainResult train(Model<T>& model, const WindowSet& train_ws, const WindowSet& val_ws, const TrainConfig& cfg) {
    cfg.validate();
    check_windows(model.config(), train_ws, "training");
    check_windows(model.config(), val_ws, "validation");
    TrainResult result;
    if (train_ws.positives() != train_ws.negatives()) {
        result.warnings.push_back("training set is not class-balanced (" + std::to_string(train_ws.positives()) +
                                  " positive, " + std::to_string(train_ws.negatives()) + " negative)");
    }
    AdamState<T> adam;
    const auto params = model.trainable_parameters();
    double best_f1 = -1.0;
    std::size_t since_best = 0;
    std::vector<std::size_t> order(train_ws.size());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, epoch));
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (cfg.shuffle) shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const auto e = std::min(order.size(), b + cfg.batch_size);
            Tensor<T> y;
            const auto x = gather_batch<T>(train_ws, order, b, e, &y);
            auto pass = model.forward(x, Mode::train, rng);
            auto loss = bce_loss(pass.probs, y);
            loss_sum += loss.loss * static_cast<double>(e - b);
            const auto grads = model.backward(loss.grad, pass);
            adam_step(params, grads, adam, cfg);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.val = evaluate(model, val_ws, cfg.threshold);
        result.history.push_back(rec);
        if (rec.val.f1 > best_f1) {
            best_f1 = rec.val.f1;
            since_best = 0;
        } else if (cfg.early_stop_patience && ++since_best >= *cfg.early_stop_patience) {
            result.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,val_accuracy,val_precision,val_recall,val_f1\n";
    for (const auto& r : history) {
        out += std::to_string(r.epoch) + ',' + text::format_double(r.train_loss) + ',' +
               text::format_double(r.val.accuracy) + ',' + text::format_double(r.val.precision) + ',' +
               text::format_double(r.val.recall) + ',' + text::format_double(r.val.f1) + '\n';
    }
    return out;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << history_csv(history);
}

template Tensor<float> gather_batch(const WindowSet&, const std::vector<std::size_t>&, std::size_t, std::size_t,
                                    Tensor<float>*);
template Tensor<double> gather_batch(const WindowSet&, const std::vector<std::size_t>&, std::size_t, std::size_t,
                                     Tensor<double>*);
template TrainResult train(Model<float>&, const WindowSet&, const WindowSet&, const TrainConfig&);
template TrainResult train(Model<double>&, const WindowSet&, const WindowSet&, const TrainConfig&);

}  // namespace etlnet
