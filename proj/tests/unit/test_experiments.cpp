#include <gtest/gtest.h>

#include <algorithm>

#include "etlnet/errors.hpp"
#include "etlnet/experiments.hpp"

using namespace etlnet;

namespace {

SweepSpec small_spec() {
    SweepSpec s;
    s.model.tcn_filters = 4;
    s.model.lstm_hidden = 4;
    s.model.dense_hidden = 4;
    s.train.epochs = 2;
    s.train.batch_size = 16;
    s.data.synth.duration_samples = 2000;
    s.data.synth.bump_count = 6;
    s.data.synth.bump_len_samples = 40;
    s.data.synth_traces = 3;
    s.data.split.holdout = {"car3"};
    s.variants = {VariantName::etlnet, VariantName::single_tcn};
    s.windows = {50, 100};
    s.precision = Precision::extended;
    s.seed = 5;
    return s;
}

ResultRow row(std::string car, double acc) {
    ResultRow r;
    r.variant = "etlnet";
    r.window = 300;
    r.position = "dashboard";
    r.car = std::move(car);
    r.ok = true;
    r.metrics.accuracy = acc;
    r.metrics.precision = acc;
    r.metrics.recall = acc;
    r.metrics.f1 = acc;
    return r;
}

}  // namespace

TEST(Sweep, GridIsCompleteAndSane) {
    const auto spec = small_spec();
    const auto t = run_sweep(spec);
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_EQ(t.failed(), 0u);
    for (const auto& r : t.rows) {
        for (double m : {r.metrics.accuracy, r.metrics.precision, r.metrics.recall, r.metrics.f1}) {
            EXPECT_GE(m, 0.0);
            EXPECT_LE(m, 1.0);
        }
        const auto cfg = cell_model_config(spec, parse_variant(r.variant), r.window);
        EXPECT_EQ(r.trainable_params, count_params(cfg).trainable);
        EXPECT_EQ(r.total_params, count_params(cfg).total);
        EXPECT_EQ(r.epochs, 2u);
        EXPECT_EQ(r.car, kAllCars);
    }
    EXPECT_EQ(t.rows[0].key(), "etlnet|50|dashboard|all");
    EXPECT_EQ(t.rows[3].key(), "single_tcn|100|dashboard|all");
}

TEST(Sweep, DeterministicAndWorkerIndependent) {
    auto spec = small_spec();
    const auto a = emit_report(run_sweep(spec), ReportFormat::csv);
    spec.workers = 3;
    const auto b = emit_report(run_sweep(spec), ReportFormat::csv);
    EXPECT_EQ(a, b);
}

TEST(Sweep, AddingAVariantDoesNotPerturbOthers) {
    auto spec = small_spec();
    spec.variants = {VariantName::etlnet};
    const auto a = run_sweep(spec);
    spec.variants = {VariantName::dual_tcn, VariantName::etlnet};
    const auto b = run_sweep(spec);
    EXPECT_EQ(a.rows[0], b.rows[2]);
    EXPECT_EQ(a.rows[1], b.rows[3]);
}

TEST(Sweep, FailedCellIsIsolated) {
    auto spec = small_spec();
    spec.variants = {VariantName::single_tcn};
    spec.windows = {50, 4000};  // longer than any trace: no windows
    const auto t = run_sweep(spec);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_TRUE(t.rows[0].ok);
    EXPECT_FALSE(t.rows[1].ok);
    EXPECT_FALSE(t.rows[1].reason.empty());
}

TEST(Sweep, UnresolvableDataIsConfigError) {
    auto spec = small_spec();
    spec.data.source = DataSource::pvs;
    spec.data.pvs_files = {"/nonexistent/trace.csv"};
    EXPECT_THROW(run_sweep(spec), ConfigError);
    spec.data.pvs_files.clear();
    EXPECT_THROW(run_sweep(spec), ConfigError);
}

TEST(Sweep, EmptyListsRejected) {
    auto spec = small_spec();
    spec.windows.clear();
    EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Sweep, PerCarLeavesEachTraceOut) {
    auto spec = small_spec();
    spec.variants = {VariantName::single_tcn};
    spec.windows = {50};
    spec.per_car = true;
    const auto t = run_sweep(spec);
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(t.rows[0].car, "car1");
    EXPECT_EQ(t.rows[2].car, "car3");
    const auto agg = aggregate_by(t, AggregateKey::car);
    ASSERT_EQ(agg.rows.size(), 1u);
    EXPECT_EQ(agg.rows[0].car, kAllCars);
}

TEST(Sweep, MultiplePositions) {
    auto spec = small_spec();
    spec.variants = {VariantName::single_tcn};
    spec.windows = {50};
    spec.data.positions = {Position::below_suspension, Position::dashboard};
    const auto t = run_sweep(spec);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0].position, "below_suspension");
    EXPECT_EQ(t.rows[1].position, "dashboard");
    EXPECT_EQ(aggregate_by(t, AggregateKey::position).rows.size(), 1u);
}

TEST(Ablation, SixVariantsPerWindow) {
    auto spec = small_spec();
    spec.windows = {50};
    spec.train.epochs = 1;
    const auto t = run_ablation(spec);
    ASSERT_EQ(t.rows.size(), 6u);
    for (const auto& r : t.rows) {
        EXPECT_EQ(r.in_features, r.variant == "reduced_feature" ? 4u : 7u);
    }
}

TEST(Aggregate, MeanOfThreeRows) {
    ResultTable t;
    t.rows = {row("car1", 0.9), row("car2", 0.95), row("car3", 1.0)};
    const auto a = aggregate_by(t, AggregateKey::car);
    ASSERT_EQ(a.rows.size(), 1u);
    EXPECT_NEAR(a.rows[0].metrics.accuracy, 0.95, 1e-15);
    EXPECT_EQ(a.rows[0].car, kAllCars);
}

TEST(Aggregate, SingleRowGroupIsIdentical) {
    ResultTable t;
    t.rows = {row("car1", 0.9)};
    auto a = aggregate_by(t, AggregateKey::car);
    ASSERT_EQ(a.rows.size(), 1u);
    auto expect = t.rows[0];
    expect.car = kAllCars;
    EXPECT_EQ(a.rows[0], expect);
}

TEST(Aggregate, OrderIndependent) {
    ResultTable t;
    Rng rng(3);
    for (int i = 0; i < 12; ++i) {
        auto r = row("car" + std::to_string(i % 4), rng.uniform());
        r.window = 100 * (1 + i % 3);
        t.rows.push_back(r);
    }
    const auto a = aggregate_by(t, AggregateKey::car);
    for (int trial = 0; trial < 5; ++trial) {
        shuffle(t.rows.begin(), t.rows.end(), rng);
        EXPECT_EQ(aggregate_by(t, AggregateKey::car), a);
    }
}

TEST(Aggregate, FailedRowsSkippedAndEmptyGroupsRejected) {
    ResultTable t;
    t.rows = {row("car1", 0.5), row("car2", 0.9)};
    t.rows[1].ok = false;
    EXPECT_EQ(aggregate_by(t, AggregateKey::car).rows[0].metrics.accuracy, 0.5);
    t.rows[0].ok = false;
    EXPECT_THROW(aggregate_by(t, AggregateKey::car), DataError);
    EXPECT_THROW(aggregate_by(ResultTable{}, AggregateKey::car), DataError);
}

TEST(Report, PercentRoundsHalfUp) {
    EXPECT_EQ(format_percent(0.99325), "99.33");
    EXPECT_EQ(format_percent(0.985567), "98.56");
    EXPECT_EQ(format_percent(1.0), "100.00");
    EXPECT_EQ(format_percent(0.0), "0.00");
    EXPECT_EQ(format_percent(0.00005), "0.01");
}

TEST(Report, CsvRoundTripsAtFullPrecision) {
    ResultTable t;
    t.metadata = {{"seed", "9"}, {"precision", "extended"}};
    t.rows = {row("car1", 0.1 + 0.2), row("car2", 1.0 / 3.0)};
    t.rows[0].metrics.confusion = {5, 1, 7, 2};
    t.rows[0].seed = 0xfedcba9876543210ull;
    t.rows[0].final_train_loss = 1e-300;
    t.rows[1].ok = false;
    t.rows[1].reason = "bad \"window\", too long";
    t.rows[1].metrics.f1_undefined = true;
    EXPECT_EQ(parse_report_csv(emit_report(t, ReportFormat::csv)), t);
}

TEST(Report, CsvParseRejectsGarbage) {
    EXPECT_THROW(parse_report_csv("nope\n"), FormatError);
    EXPECT_THROW(parse_report_csv(""), FormatError);
}

TEST(Report, MarkdownOneLinePerCell) {
    ResultTable t;
    t.rows = {row("car1", 0.99325), row("car2", 0.5)};
    const auto md = emit_report(t, ReportFormat::markdown);
    const auto lines = std::count(md.begin(), md.end(), '\n');
    EXPECT_EQ(lines, 2 + 2);  // header, alignment row, one per cell
    EXPECT_NE(md.find("| 99.33 |"), std::string::npos);
}
