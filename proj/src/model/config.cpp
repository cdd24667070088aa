#include <algorithm>
#include <charconv>
#include <sstream>

#include "etlnet/model.hpp"

namespace etlnet {

namespace {

struct VariantEntry {
    VariantName name;
    std::string_view text;
};

constexpr VariantEntry kVariants[] = {
    {VariantName::etlnet, "etlnet"},
    {VariantName::bilstm3, "bilstm3"},
    {VariantName::tcn3, "tcn3"},
    {VariantName::single_tcn, "single_tcn"},
    {VariantName::dual_tcn, "dual_tcn"},
    {VariantName::reduced_feature, "reduced_feature"},
    {VariantName::lstm_replacement, "lstm_replacement"},
    {VariantName::triple_tcn_bilstm, "triple_tcn_bilstm"},
};

std::size_t parse_size(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ArgumentError("'" + key + "' expects a non-negative integer, got '" + value + "'");
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    double out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ArgumentError("'" + key + "' expects a real number, got '" + value + "'");
    }
    return out;
}

std::string real_str(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(VariantName v) {
    for (const auto& e : kVariants)
        if (e.name == v) return e.text;
    return "unknown";
}

VariantName parse_variant(std::string_view text) {
    for (const auto& e : kVariants)
        if (e.text == text) return e.name;
    throw ArgumentError("unknown model variant '" + std::string(text) + "'");
}

const std::vector<VariantName>& all_variants() {
    static const std::vector<VariantName> v = [] {
        std::vector<VariantName> out;
        for (const auto& e : kVariants) out.push_back(e.name);
        return out;
    }();
    return v;
}

const std::vector<VariantName>& ablation_variants() {
    static const std::vector<VariantName> v{VariantName::etlnet,          VariantName::single_tcn,
                                            VariantName::dual_tcn,        VariantName::reduced_feature,
                                            VariantName::lstm_replacement, VariantName::triple_tcn_bilstm};
    return v;
}

std::string_view to_string(LayerKind k) {
    switch (k) {
        case LayerKind::tcn: return "tcn";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::dropout: return "dropout";
        case LayerKind::bilstm: return "bilstm";
        case LayerKind::lstm: return "lstm";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::dense: return "dense";
    }
    return "unknown";
}

void ModelConfig::validate() const {
    if (in_features < 1) throw ArgumentError("model.in_features must be >= 1");
    if (tcn_filters < 1 || kernel < 1 || lstm_hidden < 1 || dense_hidden < 1) {
        throw ArgumentError("model extents (tcn_filters, kernel, lstm_hidden, dense_hidden) must be >= 1");
    }
    if (dilations.empty()) throw ArgumentError("model.dilations must list at least one dilation");
    if (std::any_of(dilations.begin(), dilations.end(), [](std::size_t d) { return d < 1; })) {
        throw ArgumentError("model.dilations entries must be >= 1");
    }
    const std::size_t max_d = *std::max_element(dilations.begin(), dilations.end());
    if (window < kernel * max_d) {
        throw ArgumentError("model.window (" + std::to_string(window) + ") must be >= kernel * max dilation (" +
                            std::to_string(kernel * max_d) + ")");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError("model.dropout_rate must be in [0, 1)");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ArgumentError("model.bn_momentum must be in (0, 1)");
    if (!(bn_epsilon > 0.0)) throw ArgumentError("model.bn_epsilon must be > 0");
}

ModelConfig default_config(VariantName v) {
    ModelConfig cfg;
    cfg.variant = v;
    if (v == VariantName::reduced_feature) cfg.in_features = 4;
    return cfg;
}

std::map<std::string, std::string> model_config_to_kv(const ModelConfig& cfg) {
    std::string dil;
    for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
        if (i) dil += ",";
        dil += std::to_string(cfg.dilations[i]);
    }
    return {
        {"model.variant", std::string(to_string(cfg.variant))},
        {"model.in_features", std::to_string(cfg.in_features)},
        {"model.window", std::to_string(cfg.window)},
        {"model.tcn_filters", std::to_string(cfg.tcn_filters)},
        {"model.kernel", std::to_string(cfg.kernel)},
        {"model.dilations", dil},
        {"model.lstm_hidden", std::to_string(cfg.lstm_hidden)},
        {"model.dense_hidden", std::to_string(cfg.dense_hidden)},
        {"model.dropout_rate", real_str(cfg.dropout_rate)},
        {"model.bn_momentum", real_str(cfg.bn_momentum)},
        {"model.bn_epsilon", real_str(cfg.bn_epsilon)},
    };
}

ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv, ModelConfig cfg) {
    for (const auto& [key, value] : kv) {
        if (key == "model.variant") cfg.variant = parse_variant(value);
        else if (key == "model.in_features") cfg.in_features = parse_size(key, value);
        else if (key == "model.window") cfg.window = parse_size(key, value);
        else if (key == "model.tcn_filters") cfg.tcn_filters = parse_size(key, value);
        else if (key == "model.kernel") cfg.kernel = parse_size(key, value);
        else if (key == "model.dilations") {
            cfg.dilations.clear();
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) cfg.dilations.push_back(parse_size(key, item));
        } else if (key == "model.lstm_hidden") cfg.lstm_hidden = parse_size(key, value);
        else if (key == "model.dense_hidden") cfg.dense_hidden = parse_size(key, value);
        else if (key == "model.dropout_rate") cfg.dropout_rate = parse_real(key, value);
        else if (key == "model.bn_momentum") cfg.bn_momentum = parse_real(key, value);
        else if (key == "model.bn_epsilon") cfg.bn_epsilon = parse_real(key, value);
    }
    return cfg;
}

std::vector<LayerSpec> architecture(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<LayerSpec> layers;
    std::size_t width = cfg.in_features;
    std::size_t tcn_index = 0;

    auto regularize = [&](std::size_t ch) {
        layers.push_back({.kind = LayerKind::batchnorm, .in = ch, .out = ch});
        layers.push_back({.kind = LayerKind::dropout, .in = ch, .out = ch, .rate = cfg.dropout_rate});
    };
    auto tcn_block = [&] {
        const std::size_t d = cfg.dilations[tcn_index++ % cfg.dilations.size()];
        layers.push_back({.kind = LayerKind::tcn,
                          .in = width,
                          .out = cfg.tcn_filters,
                          .kernel = cfg.kernel,
                          .dilation = d,
                          .residual = width == cfg.tcn_filters});
        width = cfg.tcn_filters;
        regularize(width);
    };
    auto bilstm_block = [&](bool sequences) {
        layers.push_back(
            {.kind = LayerKind::bilstm, .in = width, .out = 2 * cfg.lstm_hidden, .return_sequences = sequences});
        width = 2 * cfg.lstm_hidden;
        regularize(width);
    };
    auto lstm_block = [&] {
        layers.push_back({.kind = LayerKind::lstm, .in = width, .out = cfg.lstm_hidden});
        width = cfg.lstm_hidden;
        regularize(width);
    };
    auto pool = [&] { layers.push_back({.kind = LayerKind::global_avg_pool, .in = width, .out = width}); };

    switch (cfg.variant) {
        case VariantName::etlnet:
        case VariantName::reduced_feature:
            tcn_block();
            tcn_block();
            bilstm_block(false);
            break;
        case VariantName::bilstm3:
            bilstm_block(true);
            bilstm_block(true);
            bilstm_block(false);
            break;
        case VariantName::tcn3:
            for (int i = 0; i < 3; ++i) tcn_block();
            pool();
            break;
        case VariantName::single_tcn:
            tcn_block();
            pool();
            break;
        case VariantName::dual_tcn:
            tcn_block();
            tcn_block();
            pool();
            break;
        case VariantName::lstm_replacement:
            for (int i = 0; i < 3; ++i) tcn_block();
            lstm_block();
            break;
        case VariantName::triple_tcn_bilstm:
            for (int i = 0; i < 3; ++i) tcn_block();
            bilstm_block(false);
            break;
    }
    layers.push_back({.kind = LayerKind::dense, .in = width, .out = cfg.dense_hidden, .act = Activation::relu});
    layers.push_back({.kind = LayerKind::dense, .in = cfg.dense_hidden, .out = 1, .act = Activation::sigmoid});
    return layers;
}

ParamCount count_params(const LayerSpec& s) {
    const std::uint64_t in = s.in, out = s.out;
    switch (s.kind) {
        case LayerKind::tcn: {
            const std::uint64_t n = in * out * s.kernel + out;
            return {n, n};
        }
        case LayerKind::batchnorm: return {2 * out, 4 * out};
        case LayerKind::dense: return {in * out + out, in * out + out};
        case LayerKind::lstm: {
            const std::uint64_t h = out;
            const std::uint64_t n = 4 * (in * h + h * h + h);
            return {n, n};
        }
        case LayerKind::bilstm: {
            const std::uint64_t h = out / 2;
            const std::uint64_t n = 8 * (in * h + h * h + h);
            return {n, n};
        }
        case LayerKind::dropout:
        case LayerKind::global_avg_pool: return {0, 0};
    }
    return {0, 0};
}

ParamCount count_params(const ModelConfig& cfg) {
    ParamCount total;
    for (const auto& s : architecture(cfg)) {
        const auto c = count_params(s);
        total.trainable += c.trainable;
        total.total += c.total;
    }
    return total;
}

std::vector<VariantInfo> variant_catalog() {
    return {
        {VariantName::etlnet, "two TCN blocks, one BiLSTM block, dense(ReLU) and sigmoid head",
         default_config(VariantName::etlnet)},
        {VariantName::bilstm3, "three BiLSTM blocks, each followed by batch norm and dropout",
         default_config(VariantName::bilstm3)},
        {VariantName::tcn3, "three TCN blocks, global average pooling over time", default_config(VariantName::tcn3)},
        {VariantName::single_tcn, "one TCN block, global average pooling, no recurrent block",
         default_config(VariantName::single_tcn)},
        {VariantName::dual_tcn, "two TCN blocks, global average pooling, no recurrent block",
         default_config(VariantName::dual_tcn)},
        {VariantName::reduced_feature, "base model without the gyroscope channels (accelerometer + speed)",
         default_config(VariantName::reduced_feature)},
        {VariantName::lstm_replacement, "three TCN blocks followed by a unidirectional LSTM block",
         default_config(VariantName::lstm_replacement)},
        {VariantName::triple_tcn_bilstm, "three TCN blocks followed by a BiLSTM block",
         default_config(VariantName::triple_tcn_bilstm)},
    };
}

}  // namespace etlnet
