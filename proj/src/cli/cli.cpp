#include "etlnet/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "../common/text.hpp"
#include "etlnet/config.hpp"
#include "etlnet/errors.hpp"
#include "etlnet/experiments.hpp"
#include "etlnet/simd/kernels.hpp"
#include "etlnet/verify.hpp"

namespace etlnet::cli {

namespace {

namespace fs = std::filesystem;

// Options shared by every subcommand. Sugar flags are folded into the
// key/value overrides so precedence is flag > --set > file > env > default.
struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> precision;
    std::vector<std::string> variants;
    std::vector<std::size_t> windows;
};

void add_common(CLI::App* sub, Common& c, bool sweep_flags) {
    sub->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", c.sets, "override one key (key=value), repeatable");
    sub->add_option("--seed", c.seed, "root seed for all randomness");
    sub->add_option("--workers", c.workers, "parallel sweep cells (default $ETLNET_WORKERS or 1)");
    sub->add_option("--precision", c.precision, "standard (float) or extended (double)");
    if (sweep_flags) {
        sub->add_option("--variant", c.variants, "model variant(s)");
        sub->add_option("--window", c.windows, "window size(s)");
    }
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

RunConfig resolve(const Common& c, bool sweep_flags) {
    RunConfig base;
    if (const char* env = std::getenv("ETLNET_WORKERS"); env && *env) {
        base = apply_settings(base, {{"workers", env}});
    }
    std::map<std::string, std::string> kv;
    if (!c.config.empty()) {
        std::ifstream in(c.config, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        kv = parse_settings(ss.str(), c.config);
    }
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (c.seed) kv["seed"] = std::to_string(*c.seed);
    if (c.workers) kv["workers"] = std::to_string(*c.workers);
    if (c.precision) kv["precision"] = *c.precision;
    if (!c.variants.empty()) {
        std::string v;
        for (std::size_t i = 0; i < c.variants.size(); ++i) v += (i ? "," : "") + c.variants[i];
        kv[sweep_flags ? "sweep.variants" : "model.variant"] = v;
    }
    if (!c.windows.empty()) kv[sweep_flags ? "sweep.windows" : "model.window"] = join_sizes(c.windows);
    return apply_settings(base, kv);
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Comment lines carry context; the key=value body alone reproduces the run
// when passed back through --config.
std::string manifest_text(const std::string& command, const RunConfig& cfg) {
    std::string out = "# etlnet " + command + "\n";
    out += "# created " + timestamp() + "\n";
    out += "# kernels " + std::string(simd::to_string(simd::active_backend())) + "\n";
    return out + run_config_to_text(cfg);
}

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path.string() + "'");
    f << content;
    if (!f) throw DataError("failed writing '" + path.string() + "'");
}

std::vector<SampleRecord> records_for(const RunConfig& cfg) {
    const Position pos = cfg.data.positions.front();
    std::vector<SampleRecord> out;
    for (auto& r : load_sweep_data(cfg)) {
        if (r.position == pos && r.side == cfg.data.side) out.push_back(std::move(r));
    }
    if (out.empty()) throw DataError("no records for position " + std::string(to_string(pos)));
    return out;
}

PreparedData prepare_from(const RunConfig& cfg) {
    PrepOptions prep = cfg.data.prep;
    prep.window = cfg.model.window;
    prep.features = default_features(cfg.model.in_features);
    Rng rng(derive_seed(cfg.seed, 1));
    return prepare(records_for(cfg), cfg.data.split, prep, rng);
}

void print_metrics(std::ostream& out, const MetricsReport& m) {
    using text::format_double;
    out << "accuracy=" << format_double(m.accuracy) << "\n"
        << "precision=" << format_double(m.precision) << (m.precision_undefined ? " (undefined)" : "") << "\n"
        << "recall=" << format_double(m.recall) << (m.recall_undefined ? " (undefined)" : "") << "\n"
        << "f1=" << format_double(m.f1) << (m.f1_undefined ? " (undefined)" : "") << "\n"
        << "tp=" << m.confusion.tp << " fp=" << m.confusion.fp << " tn=" << m.confusion.tn
        << " fn=" << m.confusion.fn << "\n"
        << "threshold=" << format_double(m.threshold) << "\n";
}

void check_cache(const WindowSet& ws, const ModelConfig& cfg, const fs::path& path) {
    if (ws.window != cfg.window) {
        throw DataError("window mismatch: config model.window=" + std::to_string(cfg.window) + " but cache '" +
                        path.string() + "' has window " + std::to_string(ws.window));
    }
    if (ws.channels() != cfg.in_features) {
        throw DataError("feature mismatch: config model.in_features=" + std::to_string(cfg.in_features) +
                        " but cache '" + path.string() + "' has " + std::to_string(ws.channels()) + " channels");
    }
}

int cmd_synth(const RunConfig& cfg, const fs::path& out_path, std::ostream& out) {
    RunConfig c = cfg;
    c.data.source = DataSource::synth;
    const auto records = load_sweep_data(c);
    write_text(out_path, format_csv(records));
    write_text(out_path.string() + ".manifest", manifest_text("synth", c));
    out << "wrote " << records.size() << " records to " << out_path.string() << "\n";
    return kOk;
}

int cmd_prepare(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
    const PreparedData data = prepare_from(cfg);
    fs::create_directories(out_dir);
    save_windows(out_dir / "train.etlw", data.train);
    save_windows(out_dir / "val.etlw", data.val);
    write_text(out_dir / "manifest.txt", manifest_text("prepare", cfg));
    out << "train windows " << data.train.size() << " (" << data.train.positives() << " positive)\n"
        << "val windows " << data.val.size() << " (" << data.val.positives() << " positive)\n"
        << "normalization fitted on " << data.stats.fitted_on << "\n";
    return kOk;
}

template <class T>
int train_impl(const RunConfig& cfg, const std::string& data_dir, const fs::path& out_dir, std::ostream& out,
               std::ostream& err) {
    WindowSet train_ws, val_ws;
    if (!data_dir.empty()) {
        const fs::path tp = fs::path(data_dir) / "train.etlw", vp = fs::path(data_dir) / "val.etlw";
        train_ws = load_windows(tp);
        val_ws = load_windows(vp);
        check_cache(train_ws, cfg.model, tp);
        check_cache(val_ws, cfg.model, vp);
    } else {
        auto data = prepare_from(cfg);
        train_ws = std::move(data.train);
        val_ws = std::move(data.val);
    }
    Rng model_rng(derive_seed(cfg.seed, 2));
    Model<T> model = build_model<T>(cfg.model, model_rng);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 3);
    const TrainResult result = train(model, train_ws, val_ws, tc);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";

    fs::create_directories(out_dir);
    save_checkpoint(out_dir / "model.etln", model);
    write_history_csv(out_dir / "history.csv", result.history);
    write_text(out_dir / "manifest.txt", manifest_text("train", cfg));
    for (const auto& e : result.history) {
        out << "epoch " << e.epoch << " loss " << text::format_double(e.train_loss) << " val_f1 "
            << text::format_double(e.val.f1) << "\n";
    }
    if (result.stopped_early) out << "stopped early\n";
    const MetricsReport final_metrics = evaluate(model, val_ws, tc.threshold);
    std::ostringstream ms;
    print_metrics(ms, final_metrics);
    write_text(out_dir / "metrics.txt", ms.str());
    out << ms.str();
    return kOk;
}

template <class T>
int evaluate_impl(const fs::path& checkpoint, const fs::path& data, double threshold, std::ostream& out) {
    const Model<T> model = load_checkpoint<T>(checkpoint);
    const WindowSet ws = load_windows(data);
    check_cache(ws, model.config(), data);
    print_metrics(out, evaluate(model, ws, threshold));
    return kOk;
}

int cmd_params(const RunConfig& cfg, const std::vector<std::string>& variant_names,
               const std::vector<std::size_t>& window_list, std::ostream& out) {
    std::vector<VariantName> variants;
    for (const auto& n : variant_names) variants.push_back(parse_variant(n));
    if (variants.empty()) variants = all_variants();
    std::vector<std::size_t> windows = window_list;
    if (windows.empty()) windows.push_back(cfg.model.window);
    out << "variant,window,in_features,trainable,total\n";
    for (auto v : variants) {
        for (auto w : windows) {
            ModelConfig mc = cell_model_config(cfg, v, w);
            mc.validate();
            const ParamCount pc = count_params(mc);
            out << to_string(v) << "," << w << "," << mc.in_features << "," << pc.trainable << "," << pc.total
                << "\n";
        }
    }
    return kOk;
}

int cmd_sweep(const RunConfig& cfg, bool ablate, const fs::path& out_dir, const std::string& aggregate,
              std::ostream& out) {
    const ResultTable table = ablate ? run_ablation(cfg) : run_sweep(cfg);
    RunConfig effective = cfg;
    if (ablate) effective.variants = ablation_variants();
    fs::create_directories(out_dir);
    write_text(out_dir / "results.csv", emit_report(table, ReportFormat::csv));
    write_text(out_dir / "results.md", emit_report(table, ReportFormat::markdown));
    write_text(out_dir / "manifest.txt", manifest_text(ablate ? "ablate" : "sweep", effective));
    out << emit_report(table, ReportFormat::markdown);
    if (!aggregate.empty()) {
        const AggregateKey key = aggregate == "car" ? AggregateKey::car : AggregateKey::position;
        const ResultTable agg = aggregate_by(table, key);
        write_text(out_dir / ("aggregate_" + aggregate + ".csv"), emit_report(agg, ReportFormat::csv));
        write_text(out_dir / ("aggregate_" + aggregate + ".md"), emit_report(agg, ReportFormat::markdown));
        out << "\n" << emit_report(agg, ReportFormat::markdown);
    }
    if (table.failed()) out << table.failed() << " of " << table.rows.size() << " cells failed\n";
    return kOk;
}

int cmd_verify(std::uint64_t seed, std::ostream& out) {
    const auto results = verify::run_all(seed);
    std::size_t failed = 0;
    for (const auto& r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << " max_error=" << text::format_double(r.max_error)
            << " tolerance=" << text::format_double(r.tolerance) << " checked=" << r.checked;
        if (!r.detail.empty()) out << " " << r.detail;
        out << "\n";
        if (!r.passed) ++failed;
    }
    out << (results.size() - failed) << "/" << results.size() << " checks passed\n";
    return failed ? kInvariant : kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Speed-bump detection from inertial data: synthesis, preprocessing, training, sweeps"};
    app.name("etlnet");
    app.require_subcommand(1);

    Common c_synth, c_prep, c_train, c_eval, c_sweep, c_ablate, c_params, c_verify;
    std::string out_path, data_dir, checkpoint, aggregate;
    std::optional<std::size_t> traces;
    std::vector<std::string> inputs, variant_list;
    std::vector<std::size_t> window_list;

    auto* synth = app.add_subcommand("synth", "write a synthetic trace CSV");
    add_common(synth, c_synth, false);
    synth->add_option("--out", out_path, "output CSV")->required();
    synth->add_option("--traces", traces, "number of traces");

    auto* prep = app.add_subcommand("prepare", "window CSV data into train/val caches");
    add_common(prep, c_prep, false);
    prep->add_option("--input", inputs, "input CSV file(s); default is synthetic data");
    prep->add_option("--window", c_prep.windows, "window size")->expected(1);
    prep->add_option("--out", out_path, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
    add_common(tr, c_train, false);
    tr->add_option("--data", data_dir, "directory written by prepare; default prepares from config");
    tr->add_option("--input", inputs, "input CSV file(s) when --data is not given");
    tr->add_option("--variant", c_train.variants, "model variant")->expected(1);
    tr->add_option("--window", c_train.windows, "window size")->expected(1);
    tr->add_option("--out", out_path, "output directory")->required();

    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on a window cache");
    add_common(ev, c_eval, false);
    ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", data_dir, "window cache file")->required()->check(CLI::ExistingFile);

    auto* sw = app.add_subcommand("sweep", "train every variant x window x position cell");
    add_common(sw, c_sweep, true);
    sw->add_option("--out", out_path, "output directory")->required();
    sw->add_option("--aggregate", aggregate, "also write means over car or position")
        ->check(CLI::IsMember({"car", "position"}));

    auto* ab = app.add_subcommand("ablate", "sweep the six ablation variants");
    add_common(ab, c_ablate, false);
    ab->add_option("--window", c_ablate.windows, "window size(s)");
    ab->add_option("--out", out_path, "output directory")->required();
    ab->add_option("--aggregate", aggregate, "also write means over car or position")
        ->check(CLI::IsMember({"car", "position"}));

    auto* pr = app.add_subcommand("params", "print parameter counts");
    add_common(pr, c_params, false);
    pr->add_option("--variant", variant_list, "variant(s); default all");
    pr->add_option("--window", window_list, "window size(s); default model.window");

    auto* vf = app.add_subcommand("verify", "run gradient, causality and metrics self-checks");
    add_common(vf, c_verify, false);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    auto with_inputs = [&](Common& c) {
        if (!inputs.empty()) {
            std::string files;
            for (std::size_t i = 0; i < inputs.size(); ++i) files += (i ? "," : "") + inputs[i];
            c.sets.push_back("data.source=pvs");
            c.sets.push_back("data.pvs_files=" + files);
        }
    };

    try {
        if (synth->parsed()) {
            if (traces) c_synth.sets.push_back("synth.traces=" + std::to_string(*traces));
            return cmd_synth(resolve(c_synth, false), out_path, out);
        }
        if (prep->parsed()) {
            with_inputs(c_prep);
            return cmd_prepare(resolve(c_prep, false), out_path, out);
        }
        if (tr->parsed()) {
            with_inputs(c_train);
            const RunConfig cfg = resolve(c_train, false);
            cfg.model.validate();
            cfg.train.validate();
            return cfg.precision == Precision::extended ? train_impl<double>(cfg, data_dir, out_path, out, err)
                                                        : train_impl<float>(cfg, data_dir, out_path, out, err);
        }
        if (ev->parsed()) {
            const RunConfig cfg = resolve(c_eval, false);
            return cfg.precision == Precision::extended
                       ? evaluate_impl<double>(checkpoint, data_dir, cfg.train.threshold, out)
                       : evaluate_impl<float>(checkpoint, data_dir, cfg.train.threshold, out);
        }
        if (sw->parsed()) return cmd_sweep(resolve(c_sweep, true), false, out_path, aggregate, out);
        if (ab->parsed()) return cmd_sweep(resolve(c_ablate, true), true, out_path, aggregate, out);
        if (pr->parsed()) return cmd_params(resolve(c_params, false), variant_list, window_list, out);
        if (vf->parsed()) return cmd_verify(resolve(c_verify, false).seed, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInvariant;
    }
    return kUsage;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace etlnet::cli
