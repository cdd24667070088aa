#include "etlnet/train.hpp"

namespace etlnet {

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, double threshold) {
    MetricsReport r;
    r.confusion = cm;
    r.threshold = threshold;
    const auto n = cm.total();
    r.accuracy = n ? static_cast<double>(cm.tp + cm.tn) / static_cast<double>(n) : 0.0;
    const auto pp = cm.tp + cm.fp, ap = cm.tp + cm.fn;
    r.precision_undefined = pp == 0;
    r.recall_undefined = ap == 0;
    r.precision = pp ? static_cast<double>(cm.tp) / static_cast<double>(pp) : 0.0;
    r.recall = ap ? static_cast<double>(cm.tp) / static_cast<double>(ap) : 0.0;
    r.f1_undefined = r.precision + r.recall == 0.0;
    r.f1 = f1_score(r.precision, r.recall);
    return r;
}

ConfusionMatrix confusion_matrix(const std::vector<std::uint8_t>& labels, const std::vector<std::uint8_t>& preds) {
    if (labels.size() != preds.size()) {
        throw DimensionError("confusion_matrix: " + std::to_string(labels.size()) + " labels vs " +
                             std::to_string(preds.size()) + " predictions");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool y = labels[i] != 0, p = preds[i] != 0;
        if (y && p) ++cm.tp;
        else if (!y && p) ++cm.fp;
        else if (!y && !p) ++cm.tn;
        else ++cm.fn;
    }
    return cm;
}

MetricsReport compute_metrics(const std::vector<std::uint8_t>& labels, const std::vector<double>& probs,
                              double threshold) {
    if (labels.empty()) throw ArgumentError("evaluate: empty window set");
    std::vector<std::uint8_t> preds(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) preds[i] = probs[i] >= threshold ? 1 : 0;
    return metrics_from_confusion(confusion_matrix(labels, preds), threshold);
}

template <class T>
std::vector<double> predict_windows(const Model<T>& model, const WindowSet& ws, std::size_t batch_size) {
    std::vector<std::size_t> order(ws.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> probs;
    probs.reserve(ws.size());
    for (std::size_t b = 0; b < ws.size(); b += batch_size) {
        const auto e = std::min(ws.size(), b + batch_size);
        const auto p = model.predict(gather_batch<T>(ws, order, b, e));
        for (auto v : p.data()) probs.push_back(static_cast<double>(v));
    }
    return probs;
}

template <class T>
MetricsReport evaluate(const Model<T>& model, const WindowSet& ws, double threshold) {
    if (ws.size() == 0) throw ArgumentError("evaluate: empty window set");
    return compute_metrics(ws.y, predict_windows(model, ws), threshold);
}

template std::vector<double> predict_windows(const Model<float>&, const WindowSet&, std::size_t);
template std::vector<double> predict_windows(const Model<double>&, const WindowSet&, std::size_t);
template MetricsReport evaluate(const Model<float>&, const WindowSet&, double);
template MetricsReport evaluate(const Model<double>&, const WindowSet&, double);

}  // namespace etlnet
