#include "etlnet/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>
#include <tuple>

#include "../common/text.hpp"
#include "etlnet/errors.hpp"

namespace etlnet {

std::string_view to_string(DataSource s) { return s == DataSource::synth ? "synth" : "pvs"; }

DataSource parse_data_source(std::string_view text) {
    if (text == "synth") return DataSource::synth;
    if (text == "pvs") return DataSource::pvs;
    throw ArgumentError("unknown data source '" + std::string(text) + "' (expected synth or pvs)");
}

void SweepSpec::validate() const {
    if (variants.empty()) throw ConfigError("sweep.variants must not be empty");
    if (windows.empty()) throw ConfigError("sweep.windows must not be empty");
    if (data.positions.empty()) throw ConfigError("data.positions must not be empty");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    try {
        for (auto v : variants) {
            for (auto w : windows) cell_model_config(*this, v, w).validate();
        }
        train.validate();
        if (data.source == DataSource::synth) data.synth.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (data.source == DataSource::synth && data.synth_traces < 2) {
        throw ConfigError("synth.traces must be >= 2 so both split sides are non-empty");
    }
    if (data.source == DataSource::pvs && data.pvs_files.empty()) {
        throw ConfigError("data.source=pvs requires data.pvs_files");
    }
}

std::string ResultRow::key() const {
    return variant + "|" + std::to_string(window) + "|" + position + "|" + car;
}

std::size_t ResultTable::failed() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.ok; }));
}

std::uint64_t cell_seed(std::uint64_t sweep_seed, const std::string& key) {
    // FNV-1a
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : key) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return derive_seed(sweep_seed, h);
}

ModelConfig cell_model_config(const SweepSpec& spec, VariantName variant, std::size_t window) {
    ModelConfig cfg = spec.model;
    cfg.variant = variant;
    cfg.window = window;
    cfg.in_features = default_config(variant).in_features;
    return cfg;
}

std::vector<SampleRecord> load_sweep_data(const SweepSpec& spec) {
    if (spec.data.source == DataSource::synth) {
        SynthConfig s = spec.data.synth;
        s.seed = spec.seed;
        s.side = spec.data.side;
        try {
            return generate_traces(s, spec.data.synth_traces, spec.data.positions);
        } catch (const Error& e) {
            throw ConfigError(std::string("synthetic data: ") + e.what());
        }
    }
    std::vector<SampleRecord> out;
    try {
        const ColumnMap map = spec.data.column_map ? ColumnMap::load(*spec.data.column_map) : ColumnMap::identity();
        for (auto pos : spec.data.positions) {
            for (const auto& file : spec.data.pvs_files) {
                auto recs = load_pvs_csv(file, pos, spec.data.side, map);
                out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
            }
        }
    } catch (const Error& e) {
        throw ConfigError(std::string("data: ") + e.what());
    }
    if (out.empty()) throw ConfigError("data: no records loaded");
    return out;
}

namespace {

struct Cell {
    VariantName variant;
    std::size_t window;
    Position position;
    std::string car;
    SplitSpec split;
};

template <class T>
void run_cell(const SweepSpec& spec, const Cell& cell, const std::vector<SampleRecord>& records, ResultRow& row) {
    const ModelConfig cfg = cell_model_config(spec, cell.variant, cell.window);
    const ParamCount pc = count_params(cfg);
    row.trainable_params = pc.trainable;
    row.total_params = pc.total;
    row.in_features = cfg.in_features;

    // Keyed without the variant: every variant in a cell group sees the same data.
    const std::string data_key = "data|" + std::to_string(cell.window) + "|" + row.position + "|" + cell.car;
    PrepOptions prep = spec.data.prep;
    prep.window = cell.window;
    prep.features = default_features(cfg.in_features);
    Rng prep_rng(cell_seed(spec.seed, data_key));
    PreparedData data = prepare(records, cell.split, prep, prep_rng);
    row.train_windows = data.train.size();
    row.val_windows = data.val.size();

    Rng model_rng(derive_seed(row.seed, 2));
    Model<T> model = build_model<T>(cfg, model_rng);
    TrainConfig tc = spec.train;
    tc.seed = derive_seed(row.seed, 3);
    TrainResult tr = train(model, data.train, data.val, tc);
    row.epochs = tr.history.size();
    row.final_train_loss = tr.history.empty() ? 0.0 : tr.history.back().train_loss;
    row.metrics = evaluate(model, data.val, tc.threshold);
    row.ok = true;
}

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

}  // namespace

ResultTable run_sweep(const SweepSpec& spec) {
    spec.validate();
    const auto records = load_sweep_data(spec);
    return run_sweep(spec, records);
}

ResultTable run_sweep(const SweepSpec& spec, const std::vector<SampleRecord>& records) {
    spec.validate();

    // Records per position, restricted to the configured side.
    std::vector<std::vector<SampleRecord>> by_position;
    std::vector<std::vector<std::string>> traces;
    for (auto p : spec.data.positions) {
        std::vector<SampleRecord> sel;
        for (const auto& r : records) {
            if (r.position == p && r.side == spec.data.side) sel.push_back(r);
        }
        if (sel.empty()) {
            throw ConfigError("no records for position " + std::string(to_string(p)) + ", side " +
                              std::string(to_string(spec.data.side)));
        }
        std::vector<std::string> ids;
        for (const auto& r : sel) {
            if (ids.empty() || (ids.back() != r.trace_id && std::find(ids.begin(), ids.end(), r.trace_id) == ids.end())) {
                ids.push_back(r.trace_id);
            }
        }
        by_position.push_back(std::move(sel));
        traces.push_back(std::move(ids));
    }

    std::vector<Cell> cells;
    std::vector<std::size_t> cell_pos;
    for (auto v : spec.variants) {
        for (auto w : spec.windows) {
            for (std::size_t p = 0; p < spec.data.positions.size(); ++p) {
                if (spec.per_car) {
                    for (std::size_t i = 0; i < traces[p].size(); ++i) {
                        cells.push_back({v, w, spec.data.positions[p], traces[p][i],
                                         SplitSpec{SplitMode::leave_one_out, {}, i}});
                        cell_pos.push_back(p);
                    }
                } else {
                    cells.push_back({v, w, spec.data.positions[p], kAllCars, spec.data.split});
                    cell_pos.push_back(p);
                }
            }
        }
    }

    ResultTable table;
    table.rows.resize(cells.size());
    parallel_for(cells.size(), spec.workers, [&](std::size_t i) {
        const Cell& c = cells[i];
        ResultRow& row = table.rows[i];
        row.variant = std::string(to_string(c.variant));
        row.window = c.window;
        row.position = std::string(to_string(c.position));
        row.car = c.car;
        row.seed = cell_seed(spec.seed, row.key());
        try {
            if (spec.precision == Precision::extended) run_cell<double>(spec, c, by_position[cell_pos[i]], row);
            else run_cell<float>(spec, c, by_position[cell_pos[i]], row);
        } catch (const std::exception& e) {
            row.ok = false;
            row.reason = one_line(e.what());
        }
    });

    table.metadata["seed"] = std::to_string(spec.seed);
    table.metadata["precision"] = std::string(to_string(spec.precision));
    table.metadata["data.source"] = std::string(to_string(spec.data.source));
    table.metadata["data.side"] = std::string(to_string(spec.data.side));
    return table;
}

ResultTable run_ablation(SweepSpec spec) {
    spec.variants = ablation_variants();
    return run_sweep(spec);
}

namespace {

// Sum in sorted order so the result does not depend on input order.
double sorted_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

ResultTable aggregate_by(const ResultTable& table, AggregateKey key) {
    if (table.rows.empty()) throw DataError("cannot aggregate an empty table");
    using GroupKey = std::tuple<std::string, std::size_t, std::string, std::string>;
    std::map<GroupKey, std::vector<const ResultRow*>> groups;
    for (const auto& r : table.rows) {
        GroupKey k{r.variant, r.window, r.position, r.car};
        (key == AggregateKey::car ? std::get<3>(k) : std::get<2>(k)) = kAllCars;
        groups[k].push_back(&r);
    }

    ResultTable out;
    out.metadata = table.metadata;
    out.metadata["aggregate"] = key == AggregateKey::car ? "car" : "position";
    for (auto& [group, members] : groups) {
        std::vector<const ResultRow*> ok;
        for (auto* r : members) {
            if (r->ok) ok.push_back(r);
        }
        if (ok.empty()) {
            throw DataError("aggregation group " + std::get<0>(group) + "|" + std::to_string(std::get<1>(group)) + "|" +
                            std::get<2>(group) + "|" + std::get<3>(group) + " has no successful rows");
        }
        std::sort(ok.begin(), ok.end(), [](const ResultRow* a, const ResultRow* b) { return a->key() < b->key(); });

        ResultRow agg = *ok.front();
        (key == AggregateKey::car ? agg.car : agg.position) = kAllCars;
        agg.seed = 0;
        agg.reason.clear();
        std::vector<double> acc, prec, rec, f1, loss;
        ConfusionMatrix cm;
        agg.train_windows = agg.val_windows = agg.epochs = 0;
        agg.metrics.precision_undefined = agg.metrics.recall_undefined = agg.metrics.f1_undefined = false;
        for (auto* r : ok) {
            acc.push_back(r->metrics.accuracy);
            prec.push_back(r->metrics.precision);
            rec.push_back(r->metrics.recall);
            f1.push_back(r->metrics.f1);
            loss.push_back(r->final_train_loss);
            cm.tp += r->metrics.confusion.tp;
            cm.fp += r->metrics.confusion.fp;
            cm.tn += r->metrics.confusion.tn;
            cm.fn += r->metrics.confusion.fn;
            agg.metrics.precision_undefined |= r->metrics.precision_undefined;
            agg.metrics.recall_undefined |= r->metrics.recall_undefined;
            agg.metrics.f1_undefined |= r->metrics.f1_undefined;
            agg.train_windows += r->train_windows;
            agg.val_windows += r->val_windows;
            agg.epochs = std::max(agg.epochs, r->epochs);
        }
        agg.metrics.accuracy = sorted_mean(acc);
        agg.metrics.precision = sorted_mean(prec);
        agg.metrics.recall = sorted_mean(rec);
        agg.metrics.f1 = sorted_mean(f1);
        agg.metrics.confusion = cm;
        agg.final_train_loss = sorted_mean(loss);
        out.rows.push_back(std::move(agg));
    }
    return out;
}

std::string format_percent(double fraction) {
    const double scaled = fraction * 10000.0;
    // Tolerance absorbs representation error such as 0.99325 * 1e4 = 9932.4999...
    const double r = std::floor(std::fabs(scaled) + 0.5 + 1e-9);
    const auto n = static_cast<long long>(r);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%lld.%02lld", (scaled < 0 && n != 0) ? "-" : "", n / 100, n % 100);
    return buf;
}

namespace {

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{
        "variant",       "window",         "position",         "car",           "ok",
        "reason",        "accuracy",       "precision",        "recall",        "f1",
        "tp",            "fp",             "tn",               "fn",            "threshold",
        "precision_undefined", "recall_undefined", "f1_undefined", "trainable_params", "total_params",
        "in_features",   "train_windows",  "val_windows",      "epochs",        "final_train_loss",
        "seed"};
    return cols;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw FormatError("unterminated quote in report row");
    out.push_back(std::move(cur));
    return out;
}

std::string b(bool v) { return v ? "1" : "0"; }

std::string csv_report(const ResultTable& t) {
    std::string out;
    for (const auto& [k, v] : t.metadata) out += "# " + k + "=" + one_line(v) + "\n";
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += "\n";
    using text::format_double;
    for (const auto& r : t.rows) {
        const auto& m = r.metrics;
        const std::vector<std::string> cells{
            quote(r.variant), std::to_string(r.window), quote(r.position), quote(r.car), b(r.ok), quote(r.reason),
            format_double(m.accuracy), format_double(m.precision), format_double(m.recall), format_double(m.f1),
            std::to_string(m.confusion.tp), std::to_string(m.confusion.fp), std::to_string(m.confusion.tn),
            std::to_string(m.confusion.fn), format_double(m.threshold), b(m.precision_undefined),
            b(m.recall_undefined), b(m.f1_undefined), std::to_string(r.trainable_params),
            std::to_string(r.total_params), std::to_string(r.in_features), std::to_string(r.train_windows),
            std::to_string(r.val_windows), std::to_string(r.epochs), format_double(r.final_train_loss),
            std::to_string(r.seed)};
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
        out += "\n";
    }
    return out;
}

std::string markdown_report(const ResultTable& t) {
    std::string out = "| Variant | Window | Position | Car | Accuracy | Precision | Recall | F1 | Trainable | Total | Status |\n";
    out += "|---|---:|---|---|---:|---:|---:|---:|---:|---:|---|\n";
    for (const auto& r : t.rows) {
        const auto& m = r.metrics;
        out += "| " + r.variant + " | " + std::to_string(r.window) + " | " + r.position + " | " + r.car + " | ";
        if (r.ok) {
            out += format_percent(m.accuracy) + " | " + format_percent(m.precision) + " | " +
                   format_percent(m.recall) + " | " + format_percent(m.f1) + " | ";
        } else {
            out += "- | - | - | - | ";
        }
        std::string status = r.ok ? "ok" : "failed: " + r.reason;
        std::string escaped;
        for (char c : status) {
            if (c == '|') escaped += '\\';
            escaped += c;
        }
        out += std::to_string(r.trainable_params) + " | " + std::to_string(r.total_params) + " | " + escaped + " |\n";
    }
    return out;
}

template <class U>
U parse_uint(const std::string& s, const char* what) {
    U v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError(std::string("report: bad ") + what + " '" + s + "'");
    }
    return v;
}

double parse_real(const std::string& s, const char* what) {
    auto v = text::parse_double(s);
    if (!v) throw FormatError(std::string("report: bad ") + what + " '" + s + "'");
    return *v;
}

bool parse_flag(const std::string& s, const char* what) {
    if (s == "1") return true;
    if (s == "0") return false;
    throw FormatError(std::string("report: bad ") + what + " '" + s + "'");
}

}  // namespace

std::string emit_report(const ResultTable& table, ReportFormat format) {
    return format == ReportFormat::csv ? csv_report(table) : markdown_report(table);
}

ResultTable parse_report_csv(std::string_view content) {
    ResultTable t;
    bool header_seen = false;
    for (auto raw : text::split(content, '\n')) {
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header_seen && line.substr(0, 2) == "# ") {
            const auto body = line.substr(2);
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) throw FormatError("report: bad metadata line");
            t.metadata[std::string(body.substr(0, eq))] = std::string(body.substr(eq + 1));
            continue;
        }
        auto cells = split_csv_line(line);
        if (!header_seen) {
            if (cells != csv_columns()) throw FormatError("report: unexpected header");
            header_seen = true;
            continue;
        }
        if (cells.size() != csv_columns().size()) {
            throw FormatError("report: row has " + std::to_string(cells.size()) + " fields, expected " +
                              std::to_string(csv_columns().size()));
        }
        ResultRow r;
        auto& m = r.metrics;
        std::size_t i = 0;
        r.variant = cells[i++];
        r.window = parse_uint<std::size_t>(cells[i++], "window");
        r.position = cells[i++];
        r.car = cells[i++];
        r.ok = parse_flag(cells[i++], "ok");
        r.reason = cells[i++];
        m.accuracy = parse_real(cells[i++], "accuracy");
        m.precision = parse_real(cells[i++], "precision");
        m.recall = parse_real(cells[i++], "recall");
        m.f1 = parse_real(cells[i++], "f1");
        m.confusion.tp = parse_uint<std::uint64_t>(cells[i++], "tp");
        m.confusion.fp = parse_uint<std::uint64_t>(cells[i++], "fp");
        m.confusion.tn = parse_uint<std::uint64_t>(cells[i++], "tn");
        m.confusion.fn = parse_uint<std::uint64_t>(cells[i++], "fn");
        m.threshold = parse_real(cells[i++], "threshold");
        m.precision_undefined = parse_flag(cells[i++], "precision_undefined");
        m.recall_undefined = parse_flag(cells[i++], "recall_undefined");
        m.f1_undefined = parse_flag(cells[i++], "f1_undefined");
        r.trainable_params = parse_uint<std::uint64_t>(cells[i++], "trainable_params");
        r.total_params = parse_uint<std::uint64_t>(cells[i++], "total_params");
        r.in_features = parse_uint<std::size_t>(cells[i++], "in_features");
        r.train_windows = parse_uint<std::size_t>(cells[i++], "train_windows");
        r.val_windows = parse_uint<std::size_t>(cells[i++], "val_windows");
        r.epochs = parse_uint<std::size_t>(cells[i++], "epochs");
        r.final_train_loss = parse_real(cells[i++], "final_train_loss");
        r.seed = parse_uint<std::uint64_t>(cells[i++], "seed");
        t.rows.push_back(std::move(r));
    }
    if (!header_seen) throw FormatError("report: missing header");
    return t;
}

}  // namespace etlnet
