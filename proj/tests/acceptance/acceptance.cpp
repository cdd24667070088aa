// Acceptance gate: one PASS/FAIL line per criterion. Criterion 9 needs real
// PVS data (ETLNET_PVS_FILES) and is skipped otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "etlnet/config.hpp"
#include "etlnet/dataio.hpp"
#include "etlnet/experiments.hpp"
#include "etlnet/model.hpp"
#include "etlnet/simd/kernels.hpp"
#include "etlnet/synth.hpp"
#include "etlnet/train.hpp"
#include "etlnet/verify.hpp"

using namespace etlnet;

namespace {

// Tolerances and budgets pinned from the acceptance criteria.
constexpr double kLayerRelTol = 1e-4;
constexpr double kModelRelTol = 1e-3;
constexpr std::size_t kMinShapes = 3;
constexpr double kGradientBudgetS = 60.0;
constexpr std::size_t kOracleCases = 1000;
constexpr double kStatedF1 = 0.99325;
constexpr double kReportedF1 = 0.9933;
constexpr double kF1Tol = 1e-4;
constexpr double kCar1Mean = 98.5567;
constexpr std::size_t kWindowCases = 200;
constexpr double kPrepBudgetS = 10.0;
constexpr double kLearnF1 = 0.95;
constexpr std::size_t kLearnEpochs = 20;
constexpr std::size_t kLearnMinWindows = 2000;
constexpr double kLearnBudgetS = 300.0;
constexpr double kPvsF1 = 0.97;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst_layer = 0, worst_model = 0;
    std::map<std::string, std::size_t> shapes;
    std::string failures;
    const auto initial = simd::active_backend();
    std::vector<simd::Backend> backends{simd::Backend::scalar};
    if (simd::backend_available(simd::Backend::avx2)) backends.push_back(simd::Backend::avx2);
    for (auto be : backends) {
        simd::set_active_backend(be);
        for (const auto& r : verify::layer_gradient_checks(1)) {
            const std::string kind = r.name.substr(0, r.name.find(' '));
            ++shapes[kind];
            worst_layer = std::max(worst_layer, r.max_error);
            if (!r.passed || r.max_error >= kLayerRelTol || r.tolerance > kLayerRelTol) {
                ok = false;
                failures += " " + r.name;
            }
        }
        for (std::uint64_t seed : {11, 12, 13}) {
            const auto r = verify::model_gradient_check(seed, 20);
            ++shapes["model"];
            worst_model = std::max(worst_model, r.max_error);
            if (!r.passed || r.max_error >= kModelRelTol || r.tolerance > kModelRelTol) {
                ok = false;
                failures += " " + r.name;
            }
        }
    }
    simd::set_active_backend(initial);
    const std::size_t nb = backends.size();
    for (const char* kind : {"conv", "batchnorm", "dropout", "lstm", "bilstm", "dense", "relu", "sigmoid", "model"}) {
        if (shapes[kind] < kMinShapes * nb) {
            ok = false;
            failures += std::string(" too few shapes for ") + kind;
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= kGradientBudgetS) ok = false;
    return {ok, "worst layer rel err " + fmt("%.2e", worst_layer) + ", worst model rel err " +
                    fmt("%.2e", worst_model) + ", " + std::to_string(nb) + " backend(s), " + fmt("%.2f s", secs) +
                    failures};
}

Outcome causality() {
    std::size_t combos = 0;
    bool ok = true;
    for (const auto& r : verify::causality_checks(2)) {
        ++combos;
        ok = ok && r.passed;
    }
    ok = ok && combos == 9;
    return {ok, std::to_string(combos) + " (k, d) combinations, all outputs at t < t' unchanged"};
}

Outcome metrics_oracle() {
    const auto r = verify::metrics_oracle_check(3, kOracleCases);
    const double f1 = f1_score(0.9946, 0.9919);
    // The reference P and R are rounded to four places, so the recomputed F1 sits
    // within 1e-4 of 99.33 without rendering to it.
    const bool ok = r.passed && r.checked == kOracleCases && std::fabs(f1 - kStatedF1) <= kF1Tol &&
                    std::fabs(f1 - kReportedF1) <= kF1Tol;
    return {ok, std::to_string(r.checked) + " oracle cases exact; F1(0.9946, 0.9919) = " + fmt("%.6f", f1) +
                    ", |F1 - 0.9933| = " + fmt("%.1e", std::fabs(f1 - kReportedF1))};
}

Outcome table_average() {
    ResultTable t;
    for (auto [car, acc] : std::vector<std::pair<const char*, double>>{{"car1_a", 0.9880}, {"car1_b", 0.9857},
                                                                      {"car1_c", 0.9830}}) {
        ResultRow r;
        r.variant = "etlnet";
        r.window = 300;
        r.position = "mixed";
        r.car = car;
        r.ok = true;
        r.metrics.accuracy = acc;
        t.rows.push_back(r);
    }
    const auto agg = aggregate_by(t, AggregateKey::car);
    const double mean = agg.rows.at(0).metrics.accuracy * 100.0;
    const bool ok = agg.rows.size() == 1 && std::fabs(mean - kCar1Mean) < 1e-4 &&
                    format_percent(agg.rows[0].metrics.accuracy) == "98.56";
    return {ok, "mean " + fmt("%.4f", mean) + " renders " + format_percent(agg.rows[0].metrics.accuracy)};
}

// Element enumeration over every tensor the built model owns.
ParamCount enumerate(Model<float>& m) {
    ParamCount pc;
    for (const auto& p : m.parameters()) {
        pc.total += p.tensor->size();
        if (p.trainable) pc.trainable += p.tensor->size();
    }
    return pc;
}

Outcome parameters() {
    bool ok = true;
    std::size_t cases = 0;
    std::string failures;
    for (auto v : all_variants()) {
        for (std::size_t w : {100, 200, 300, 400, 500}) {
            ModelConfig cfg = default_config(v);
            cfg.window = w;
            Rng rng(w);
            auto m = build_model<float>(cfg, rng);
            ++cases;
            if (enumerate(m) != count_params(cfg)) {
                ok = false;
                failures += " " + std::string(to_string(v)) + "@" + std::to_string(w);
            }
        }
    }
    const auto full = count_params(default_config(VariantName::etlnet));
    const auto reduced = count_params(default_config(VariantName::reduced_feature));
    const std::uint64_t dropped = default_config(VariantName::etlnet).in_features -
                                  default_config(VariantName::reduced_feature).in_features;
    const ModelConfig d;
    const std::uint64_t delta = full.trainable - reduced.trainable;
    ok = ok && delta == dropped * d.kernel * d.tcn_filters && delta == 645377 - 644801;
    auto total = [](VariantName v) { return count_params(default_config(v)).total; };
    const bool order = total(VariantName::single_tcn) < total(VariantName::dual_tcn) &&
                       total(VariantName::dual_tcn) < total(VariantName::etlnet) &&
                       total(VariantName::etlnet) < total(VariantName::triple_tcn_bilstm);
    ok = ok && order && cases == 40;
    return {ok, std::to_string(cases) + " variant/window cases match enumeration; reduced delta " +
                    std::to_string(delta) + "; ordering " + std::to_string(total(VariantName::single_tcn)) + " < " +
                    std::to_string(total(VariantName::dual_tcn)) + " < " + std::to_string(total(VariantName::etlnet)) +
                    " < " + std::to_string(total(VariantName::triple_tcn_bilstm)) + failures};
}

Outcome preprocessing() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(6);
    bool ok = true;
    std::string failures;

    // Window count: formula against a brute-force start enumeration and make_windows itself.
    for (std::size_t i = 0; i < kWindowCases; ++i) {
        const std::size_t len = rng.below(600), w = 1 + rng.below(120), s = 1 + rng.below(60);
        std::size_t brute = 0;
        for (std::size_t start = 0; start + w <= len; start += s) ++brute;
        std::vector<SampleRecord> recs(len);
        for (std::size_t k = 0; k < len; ++k) {
            recs[k].trace_id = "t";
            recs[k].timestamp = static_cast<double>(k);
        }
        if (window_count(len, w, s) != brute || make_windows(recs, w, s, 0.1).size() != brute) {
            ok = false;
            failures = " window count";
        }
    }

    // Balance parity and split disjointness on synthetic traces.
    SynthConfig sc;
    sc.duration_samples = 3000;
    sc.bump_count = 8;
    sc.trace_id = "car";
    const auto recs = generate_traces(sc, 5, {Position::dashboard});
    const auto ws = make_windows(recs, 100, 50, 0.15);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng brng(seed);
        const auto bal = balance_classes(ws, brng);
        if (bal.positives() != bal.negatives() || bal.positives() != std::min(ws.positives(), ws.negatives())) {
            ok = false;
            failures += " balance";
        }
    }
    for (std::size_t i = 0; i < 5; ++i) {
        auto [train, val] = split(ws, {SplitMode::leave_one_out, {}, i});
        std::set<std::string> a, b;
        for (const auto& p : train.provenance) a.insert(p.trace_id);
        for (const auto& p : val.provenance) b.insert(p.trace_id);
        for (const auto& id : b) {
            if (a.count(id)) {
                ok = false;
                failures += " split";
            }
        }
        if (b.size() != 1 || train.size() + val.size() != ws.size()) ok = false;
    }

    // Degenerate features map to 0 with no NaN under both schemes.
    std::vector<SampleRecord> flat(10);
    for (std::size_t k = 0; k < flat.size(); ++k) {
        flat[k].values.fill(3.5);
        flat[k][Feature::acc_x] = static_cast<double>(k);
    }
    for (auto scheme : {NormScheme::minmax, NormScheme::zscore}) {
        for (const auto& r : apply_normalizer(flat, fit_normalizer(flat, scheme))) {
            for (std::size_t f = 1; f < kNumFeatures; ++f) {
                if (r.values[f] != 0.0) {
                    ok = false;
                    failures += " normalizer";
                }
            }
            if (!std::isfinite(r[Feature::acc_x])) ok = false;
        }
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < kPrepBudgetS;
    return {ok, std::to_string(kWindowCases) + " window-count cases, parity, disjointness, degenerate features; " +
                    fmt("%.2f s", secs) + failures};
}

struct LearnRun {
    std::vector<EpochRecord> history;
    std::size_t windows = 0;
};

LearnRun learn_once() {
    SynthConfig sc;
    sc.duration_samples = 20000;
    sc.bump_count = 80;
    sc.bump_len_samples = 60;
    sc.noise_std = 0.3;
    sc.bump_amplitude = 1.5;  // 5x noise
    sc.gyro_amplitude = 0.15;
    sc.seed = 7;
    sc.trace_id = "car";
    const auto recs = generate_traces(sc, 8, {Position::dashboard});

    PrepOptions prep;
    prep.window = 100;
    prep.stride = 50;
    prep.label_threshold = 0.15;
    Rng prep_rng(derive_seed(7, 1));
    const auto data = prepare(recs, {SplitMode::holdout_disjoint, {"car7", "car8"}, 0}, prep, prep_rng);

    ModelConfig mc;
    mc.tcn_filters = 8;
    mc.lstm_hidden = 16;
    mc.dense_hidden = 16;
    mc.window = 100;
    Rng model_rng(derive_seed(7, 2));
    auto model = build_model<double>(mc, model_rng);

    TrainConfig tc;
    tc.epochs = kLearnEpochs;
    tc.batch_size = 32;
    tc.learning_rate = 1e-3;
    tc.seed = derive_seed(7, 3);
    LearnRun run;
    run.history = train(model, data.train, data.val, tc).history;
    run.windows = data.train.size() + data.val.size();
    return run;
}

Outcome learnability() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto a = learn_once();
    const double secs = seconds_since(t0);
    const auto b = learn_once();
    double best = 0;
    std::size_t first = 0;
    for (const auto& e : a.history) {
        best = std::max(best, e.val.f1);
        if (!first && e.val.f1 >= kLearnF1) first = e.epoch;
    }
    const bool same = a.history == b.history;
    const bool ok = first != 0 && a.history.size() <= kLearnEpochs && a.windows >= kLearnMinWindows && same &&
                    secs < kLearnBudgetS;
    return {ok, std::to_string(a.windows) + " windows; val F1 >= 0.95 first at epoch " + std::to_string(first) +
                    ", best " + fmt("%.4f", best) + ", final " + fmt("%.4f", a.history.back().val.f1) + "; " +
                    fmt("%.1f s", secs) + " per run; rerun history " + (same ? "identical" : "DIFFERS")};
}

Outcome harness() {
    SweepSpec spec;
    spec.model.tcn_filters = 4;
    spec.model.lstm_hidden = 4;
    spec.model.dense_hidden = 4;
    spec.train.epochs = 2;
    spec.train.batch_size = 16;
    spec.data.synth.duration_samples = 3000;
    spec.data.synth.bump_count = 8;
    spec.data.synth.bump_len_samples = 50;
    spec.data.synth_traces = 4;
    spec.variants = {VariantName::etlnet, VariantName::single_tcn};
    spec.windows = {100, 200};
    spec.precision = Precision::extended;
    spec.seed = 8;
    spec.workers = 2;

    const auto table = run_sweep(spec);
    const auto csv = emit_report(table, ReportFormat::csv);
    const bool complete = table.rows.size() == 4 && table.failed() == 0;
    const bool round_trip = parse_report_csv(csv) == table;

    const auto manifest = "# acceptance\n" + run_config_to_text(spec);
    const RunConfig replay = apply_settings(RunConfig{}, parse_settings(manifest));
    const auto again = emit_report(run_sweep(replay), ReportFormat::csv);
    const bool repro = again == csv;
    return {complete && round_trip && repro,
            std::to_string(table.rows.size()) + " rows, " + std::to_string(table.failed()) + " failed; CSV round-trip " +
                (round_trip ? "exact" : "BROKEN") + "; manifest replay " + (repro ? "bit-identical" : "DIFFERS")};
}

std::optional<Outcome> pvs() {
    const char* files = std::getenv("ETLNET_PVS_FILES");
    if (!files || !*files) return std::nullopt;
    std::map<std::string, std::string> kv{{"data.source", "pvs"},
                                          {"data.pvs_files", files},
                                          {"data.positions", "dashboard"},
                                          {"data.side", "right"},
                                          {"sweep.variants", "etlnet"},
                                          {"sweep.windows", "300,400"}};
    if (const char* m = std::getenv("ETLNET_PVS_COLUMN_MAP")) kv["data.column_map"] = m;
    if (const char* h = std::getenv("ETLNET_PVS_HOLDOUT")) kv["data.holdout"] = h;
    if (const char* e = std::getenv("ETLNET_PVS_EPOCHS")) kv["train.epochs"] = e;
    const auto table = run_sweep(apply_settings(RunConfig{}, kv));
    bool ok = table.failed() == 0;
    std::string detail;
    for (const auto& r : table.rows) {
        ok = ok && r.metrics.f1 >= kPvsF1;
        detail += "W=" + std::to_string(r.window) + " acc " + format_percent(r.metrics.accuracy) + " P " +
                  format_percent(r.metrics.precision) + " R " + format_percent(r.metrics.recall) + " F1 " +
                  format_percent(r.metrics.f1) + (r.ok ? "" : " failed: " + r.reason) + "; ";
    }
    return Outcome{ok, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradients},
        {"conv causality", causality},
        {"metrics oracle", metrics_oracle},
        {"table averaging", table_average},
        {"parameter accounting", parameters},
        {"preprocessing invariants", preprocessing},
        {"end-to-end learnability", learnability},
        {"sweep/ablation harness", harness},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    try {
        if (auto o = pvs()) {
            std::printf("criterion 9 %s: PVS reference run (%s)\n", o->pass ? "PASS" : "FAIL", o->detail.c_str());
            failed += !o->pass;
        } else {
            std::printf("criterion 9 SKIP: PVS reference run (set ETLNET_PVS_FILES to enable)\n");
        }
    } catch (const std::exception& e) {
        std::printf("criterion 9 FAIL: PVS reference run (exception: %s)\n", e.what());
        ++failed;
    }
    return failed ? 1 : 0;
}
