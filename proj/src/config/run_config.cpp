#include "etlnet/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "../common/text.hpp"

namespace etlnet {

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

template <class C, class F>
std::string join_map(const C& items, F&& f) {
    std::vector<std::string> out;
    for (const auto& i : items) out.push_back(std::string(f(i)));
    return join(out);
}

std::vector<std::string> split_list(std::string_view v) {
    std::vector<std::string> out;
    if (text::trim(v).empty()) return out;
    for (auto item : text::split(v, ',')) out.emplace_back(text::trim(item));
    return out;
}

std::size_t to_size(std::string_view v) {
    v = text::trim(v);
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ArgumentError("expected a non-negative integer, got '" + std::string(v) + "'");
    }
    return out;
}

std::uint64_t to_u64(std::string_view v) {
    v = text::trim(v);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ArgumentError("expected an unsigned 64-bit integer, got '" + std::string(v) + "'");
    }
    return out;
}

double to_real(std::string_view v) {
    auto d = text::parse_double(v);
    if (!d) throw ArgumentError("expected a number, got '" + std::string(v) + "'");
    return *d;
}

bool to_bool(std::string_view v) {
    v = text::trim(v);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ArgumentError("expected true or false, got '" + std::string(v) + "'");
}

std::string real(double v) { return text::format_double(v); }

using Setter = std::function<void(RunConfig&, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
    Getter get;
    Setter set;
};

const std::map<std::string, Key>& keys() {
    static const std::map<std::string, Key> table = [] {
        std::map<std::string, Key> k;
        k["seed"] = {[](const RunConfig& c) { return std::to_string(c.seed); },
                     [](RunConfig& c, std::string_view v) { c.seed = to_u64(v); }};
        k["precision"] = {[](const RunConfig& c) { return std::string(to_string(c.precision)); },
                          [](RunConfig& c, std::string_view v) { c.precision = parse_precision(v); }};
        k["workers"] = {[](const RunConfig& c) { return std::to_string(c.workers); },
                        [](RunConfig& c, std::string_view v) { c.workers = to_size(v); }};

        // model.* reuses the checkpoint key/value view.
        for (const auto& [name, unused] : model_config_to_kv(ModelConfig{})) {
            const std::string key = name;
            k[key] = {[key](const RunConfig& c) { return model_config_to_kv(c.model).at(key); },
                      [key](RunConfig& c, std::string_view v) {
                          c.model = model_config_from_kv({{key, std::string(text::trim(v))}}, c.model);
                      }};
        }

        k["train.lr"] = {[](const RunConfig& c) { return real(c.train.learning_rate); },
                         [](RunConfig& c, std::string_view v) { c.train.learning_rate = to_real(v); }};
        k["train.beta1"] = {[](const RunConfig& c) { return real(c.train.beta1); },
                            [](RunConfig& c, std::string_view v) { c.train.beta1 = to_real(v); }};
        k["train.beta2"] = {[](const RunConfig& c) { return real(c.train.beta2); },
                            [](RunConfig& c, std::string_view v) { c.train.beta2 = to_real(v); }};
        k["train.adam_epsilon"] = {[](const RunConfig& c) { return real(c.train.adam_epsilon); },
                                   [](RunConfig& c, std::string_view v) { c.train.adam_epsilon = to_real(v); }};
        k["train.batch_size"] = {[](const RunConfig& c) { return std::to_string(c.train.batch_size); },
                                 [](RunConfig& c, std::string_view v) { c.train.batch_size = to_size(v); }};
        k["train.epochs"] = {[](const RunConfig& c) { return std::to_string(c.train.epochs); },
                             [](RunConfig& c, std::string_view v) { c.train.epochs = to_size(v); }};
        k["train.shuffle"] = {[](const RunConfig& c) { return std::string(c.train.shuffle ? "true" : "false"); },
                              [](RunConfig& c, std::string_view v) { c.train.shuffle = to_bool(v); }};
        k["train.patience"] = {
            [](const RunConfig& c) {
                return c.train.early_stop_patience ? std::to_string(*c.train.early_stop_patience) : std::string("none");
            },
            [](RunConfig& c, std::string_view v) {
                if (text::trim(v) == "none") c.train.early_stop_patience.reset();
                else c.train.early_stop_patience = to_size(v);
            }};
        k["train.threshold"] = {[](const RunConfig& c) { return real(c.train.threshold); },
                                [](RunConfig& c, std::string_view v) { c.train.threshold = to_real(v); }};

        k["data.source"] = {[](const RunConfig& c) { return std::string(to_string(c.data.source)); },
                            [](RunConfig& c, std::string_view v) { c.data.source = parse_data_source(text::trim(v)); }};
        k["data.pvs_files"] = {[](const RunConfig& c) {
                                   return join_map(c.data.pvs_files, [](const auto& p) { return p.string(); });
                               },
                               [](RunConfig& c, std::string_view v) {
                                   c.data.pvs_files.clear();
                                   for (auto& f : split_list(v)) c.data.pvs_files.emplace_back(f);
                               }};
        k["data.column_map"] = {[](const RunConfig& c) {
                                    return c.data.column_map ? c.data.column_map->string() : std::string();
                                },
                                [](RunConfig& c, std::string_view v) {
                                    v = text::trim(v);
                                    if (v.empty()) c.data.column_map.reset();
                                    else c.data.column_map = std::filesystem::path(std::string(v));
                                }};
        k["data.side"] = {[](const RunConfig& c) { return std::string(to_string(c.data.side)); },
                          [](RunConfig& c, std::string_view v) { c.data.side = parse_side(text::trim(v)); }};
        k["data.positions"] = {[](const RunConfig& c) {
                                   return join_map(c.data.positions, [](Position p) { return to_string(p); });
                               },
                               [](RunConfig& c, std::string_view v) {
                                   c.data.positions.clear();
                                   for (auto& p : split_list(v)) c.data.positions.push_back(parse_position(p));
                               }};
        k["data.split"] = {
            [](const RunConfig& c) {
                return std::string(c.data.split.mode == SplitMode::leave_one_out ? "loo" : "holdout");
            },
            [](RunConfig& c, std::string_view v) {
                v = text::trim(v);
                if (v == "loo") c.data.split.mode = SplitMode::leave_one_out;
                else if (v == "holdout") c.data.split.mode = SplitMode::holdout_disjoint;
                else throw ArgumentError("expected holdout or loo, got '" + std::string(v) + "'");
            }};
        k["data.holdout"] = {[](const RunConfig& c) {
                                 return join(std::vector<std::string>(c.data.split.holdout.begin(),
                                                                      c.data.split.holdout.end()));
                             },
                             [](RunConfig& c, std::string_view v) {
                                 c.data.split.holdout.clear();
                                 for (auto& id : split_list(v)) c.data.split.holdout.insert(id);
                             }};
        k["data.loo_index"] = {[](const RunConfig& c) { return std::to_string(c.data.split.loo_index); },
                               [](RunConfig& c, std::string_view v) { c.data.split.loo_index = to_size(v); }};
        k["data.stride"] = {[](const RunConfig& c) { return std::to_string(c.data.prep.stride); },
                            [](RunConfig& c, std::string_view v) { c.data.prep.stride = to_size(v); }};
        k["data.label_threshold"] = {[](const RunConfig& c) { return real(c.data.prep.label_threshold); },
                                     [](RunConfig& c, std::string_view v) { c.data.prep.label_threshold = to_real(v); }};
        k["data.scheme"] = {[](const RunConfig& c) { return std::string(to_string(c.data.prep.scheme)); },
                            [](RunConfig& c, std::string_view v) { c.data.prep.scheme = parse_norm_scheme(text::trim(v)); }};
        k["data.balance"] = {[](const RunConfig& c) { return std::string(c.data.prep.balance ? "true" : "false"); },
                             [](RunConfig& c, std::string_view v) { c.data.prep.balance = to_bool(v); }};

        k["synth.traces"] = {[](const RunConfig& c) { return std::to_string(c.data.synth_traces); },
                             [](RunConfig& c, std::string_view v) { c.data.synth_traces = to_size(v); }};
        k["synth.duration"] = {[](const RunConfig& c) { return std::to_string(c.data.synth.duration_samples); },
                               [](RunConfig& c, std::string_view v) { c.data.synth.duration_samples = to_size(v); }};
        k["synth.bump_count"] = {[](const RunConfig& c) { return std::to_string(c.data.synth.bump_count); },
                                 [](RunConfig& c, std::string_view v) { c.data.synth.bump_count = to_size(v); }};
        k["synth.bump_len"] = {[](const RunConfig& c) { return std::to_string(c.data.synth.bump_len_samples); },
                               [](RunConfig& c, std::string_view v) { c.data.synth.bump_len_samples = to_size(v); }};
        k["synth.bump_amplitude"] = {[](const RunConfig& c) { return real(c.data.synth.bump_amplitude); },
                                     [](RunConfig& c, std::string_view v) { c.data.synth.bump_amplitude = to_real(v); }};
        k["synth.gyro_amplitude"] = {[](const RunConfig& c) { return real(c.data.synth.gyro_amplitude); },
                                     [](RunConfig& c, std::string_view v) { c.data.synth.gyro_amplitude = to_real(v); }};
        k["synth.noise_std"] = {[](const RunConfig& c) { return real(c.data.synth.noise_std); },
                                [](RunConfig& c, std::string_view v) { c.data.synth.noise_std = to_real(v); }};
        k["synth.base_speed"] = {[](const RunConfig& c) { return real(c.data.synth.base_speed); },
                                 [](RunConfig& c, std::string_view v) { c.data.synth.base_speed = to_real(v); }};
        k["synth.sample_rate"] = {[](const RunConfig& c) { return real(c.data.synth.sample_rate); },
                                  [](RunConfig& c, std::string_view v) { c.data.synth.sample_rate = to_real(v); }};
        k["synth.trace_prefix"] = {[](const RunConfig& c) { return c.data.synth.trace_id; },
                                   [](RunConfig& c, std::string_view v) { c.data.synth.trace_id = std::string(text::trim(v)); }};

        k["sweep.variants"] = {[](const RunConfig& c) {
                                   return join_map(c.variants, [](VariantName v) { return to_string(v); });
                               },
                               [](RunConfig& c, std::string_view v) {
                                   c.variants.clear();
                                   for (auto& n : split_list(v)) c.variants.push_back(parse_variant(n));
                               }};
        k["sweep.windows"] = {[](const RunConfig& c) {
                                  return join_map(c.windows, [](std::size_t w) { return std::to_string(w); });
                              },
                              [](RunConfig& c, std::string_view v) {
                                  c.windows.clear();
                                  for (auto& w : split_list(v)) c.windows.push_back(to_size(w));
                              }};
        k["sweep.per_car"] = {[](const RunConfig& c) { return std::string(c.per_car ? "true" : "false"); },
                              [](RunConfig& c, std::string_view v) { c.per_car = to_bool(v); }};
        return k;
    }();
    return table;
}

}  // namespace

std::map<std::string, std::string> run_config_to_kv(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& [name, key] : keys()) out[name] = key.get(cfg);
    return out;
}

std::string run_config_to_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : run_config_to_kv(cfg)) out += k + "=" + v + "\n";
    return out;
}

RunConfig apply_settings(RunConfig cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [name, value] : kv) {
        const auto it = keys().find(name);
        if (it == keys().end()) throw ConfigError("unknown configuration key '" + name + "'");
        try {
            it->second.set(cfg, value);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(name + ": " + e.what());
        }
    }
    // The input width follows the variant unless it was given explicitly.
    if (kv.count("model.variant") && !kv.count("model.in_features")) {
        cfg.model.in_features = default_config(cfg.model.variant).in_features;
    }
    return cfg;
}

std::map<std::string, std::string> parse_settings(std::string_view content, std::string_view origin) {
    std::map<std::string, std::string> kv;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
        }
        kv[std::string(text::trim(line.substr(0, eq)))] = std::string(text::trim(line.substr(eq + 1)));
    }
    return kv;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return apply_settings(std::move(base), parse_settings(ss.str(), path.string()));
}

}  // namespace etlnet
