#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "etlnet/dataio.hpp"
#include "etlnet/errors.hpp"

using namespace etlnet;

namespace {

const char* kHeader = "timestamp,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z,speed,label,position,side,trace_id\n";

std::vector<SampleRecord> trace(const std::string& id, std::size_t len, std::size_t bump_lo = 0,
                                std::size_t bump_hi = 0) {
    std::vector<SampleRecord> out(len);
    for (std::size_t i = 0; i < len; ++i) {
        out[i].timestamp = 0.01 * static_cast<double>(i);
        out[i].trace_id = id;
        for (std::size_t f = 0; f < kNumFeatures; ++f) out[i].values[f] = static_cast<double>(i % 17) + f;
        out[i].label = (i >= bump_lo && i < bump_hi) ? Label::bump : Label::no_bump;
    }
    return out;
}

WindowSet labelled(std::size_t pos, std::size_t neg) {
    WindowSet ws;
    ws.window = 2;
    ws.stride = 1;
    ws.x = Tensor<float>({pos + neg, 2, 1});
    for (std::size_t i = 0; i < pos + neg; ++i) {
        ws.x[2 * i] = static_cast<float>(i);
        ws.y.push_back(i < pos ? 1 : 0);
        ws.provenance.push_back({"t", i});
    }
    return ws;
}

}  // namespace

TEST(Csv, ThreeRowsInOrder) {
    std::string csv = kHeader;
    csv += "0,1,2,3,4,5,6,7,0,dashboard,right,a\n";
    csv += "0.01,1,2,3,4,5,6,8,1,dashboard,right,a\n";
    csv += "0.02,1,2,3,4,5,6,9,0,dashboard,right,a\n";
    auto recs = parse_pvs_csv(csv, Position::dashboard, Side::right);
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[1][Feature::speed], 8.0);
    EXPECT_EQ(recs[1].label, Label::bump);
}

TEST(Csv, NonNumericSpeedCitesLine) {
    std::string csv = kHeader;
    csv += "0,1,2,3,4,5,6,7,0,dashboard,right,a\n";
    csv += "0.01,1,2,3,4,5,6,fast,0,dashboard,right,a\n";
    try {
        parse_pvs_csv(csv, Position::dashboard, Side::right);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Csv, MissingColumnNamed) {
    std::string csv = "timestamp,acc_x\n0,1\n";
    try {
        parse_pvs_csv(csv, Position::dashboard, Side::right);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("acc_y"), std::string::npos);
    }
}

TEST(Csv, NonMonotoneTimestampIsDataError) {
    std::string csv = kHeader;
    csv += "0.5,1,2,3,4,5,6,7,0,dashboard,right,a\n";
    csv += "0.4,1,2,3,4,5,6,7,0,dashboard,right,a\n";
    EXPECT_THROW(parse_pvs_csv(csv, Position::dashboard, Side::right), DataError);
}

TEST(Csv, PositionSideFilter) {
    std::string csv = kHeader;
    const char* combos[][2] = {{"dashboard", "right"}, {"dashboard", "left"}, {"below_suspension", "right"},
                               {"above_suspension", "left"}, {"dashboard", "right"}, {"above_suspension", "right"}};
    for (int i = 0; i < 6; ++i) {
        csv += std::to_string(i) + ",1,2,3,4,5,6,7,0," + combos[i][0] + "," + combos[i][1] + ",a\n";
    }
    auto recs = parse_pvs_csv(csv, Position::dashboard, Side::right);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0].timestamp, 0.0);
    EXPECT_EQ(recs[1].timestamp, 4.0);
}

TEST(Csv, ColumnMapRenamesAndMergesLabels) {
    std::string csv = "t,ax,ay,az,gx,gy,gz,v,bump_l,bump_r\n0,1,2,3,4,5,6,7,0,1\n0.01,1,2,3,4,5,6,7,0,0\n";
    auto map = ColumnMap::parse(
        "timestamp=t\nacc_x=ax\nacc_y=ay\nacc_z=az\ngyro_x=gx\ngyro_y=gy\ngyro_z=gz\nspeed=v\n"
        "label=bump_l|bump_r\ntrace_id=const:pvs1\n");
    auto recs = parse_pvs_csv(csv, Position::dashboard, Side::right, map);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0].label, Label::bump);
    EXPECT_EQ(recs[1].label, Label::no_bump);
    EXPECT_EQ(recs[0].trace_id, "pvs1");
}

TEST(Csv, FormatRoundTrip) {
    auto recs = trace("x", 5, 1, 3);
    recs[2][Feature::acc_z] = 0.1 + 0.2;
    auto back = parse_pvs_csv(format_csv(recs), Position::dashboard, Side::right);
    EXPECT_EQ(back, recs);
}

TEST(Normalizer, MinMaxAndDegenerate) {
    auto recs = trace("a", 3);
    for (std::size_t i = 0; i < 3; ++i) {
        recs[i][Feature::acc_x] = 5.0 * i;
        recs[i][Feature::speed] = 4.0;
    }
    auto stats = fit_normalizer(recs, NormScheme::minmax);
    auto out = apply_normalizer(recs, stats);
    EXPECT_EQ(out[0][Feature::acc_x], 0.0);
    EXPECT_EQ(out[1][Feature::acc_x], 0.5);
    EXPECT_EQ(out[2][Feature::acc_x], 1.0);
    for (const auto& r : out) EXPECT_EQ(r[Feature::speed], 0.0);
}

TEST(Normalizer, ZScoreAndDegenerate) {
    auto recs = trace("a", 4);
    for (std::size_t i = 0; i < 4; ++i) {
        recs[i][Feature::acc_y] = static_cast<double>(i);
        recs[i][Feature::gyro_x] = -2.0;
    }
    auto out = apply_normalizer(recs, fit_normalizer(recs, NormScheme::zscore));
    double m = 0, v = 0;
    for (const auto& r : out) m += r[Feature::acc_y];
    for (const auto& r : out) v += r[Feature::acc_y] * r[Feature::acc_y];
    EXPECT_NEAR(m / 4, 0.0, 1e-12);
    EXPECT_NEAR(v / 4, 1.0, 1e-12);
    for (const auto& r : out) EXPECT_EQ(r[Feature::gyro_x], 0.0);
}

TEST(Normalizer, NoClippingOutsideTrainRange) {
    auto train = trace("a", 3);
    for (std::size_t i = 0; i < 3; ++i) train[i][Feature::acc_x] = static_cast<double>(i);
    auto val = trace("b", 1);
    val[0][Feature::acc_x] = 4.0;
    auto out = apply_normalizer(val, fit_normalizer(train, NormScheme::minmax));
    EXPECT_EQ(out[0][Feature::acc_x], 2.0);
}

TEST(Normalizer, EmptyInputThrows) {
    EXPECT_THROW(fit_normalizer({}, NormScheme::minmax), ArgumentError);
}

TEST(Windows, CountFormulaExamples) {
    EXPECT_EQ(window_count(1000, 300, 100), 8u);
    EXPECT_EQ(window_count(299, 300, 100), 0u);
    EXPECT_EQ(make_windows(trace("a", 1000), 300, 100, 0.15).size(), 8u);
    EXPECT_EQ(make_windows(trace("a", 299), 300, 100, 0.15).size(), 0u);
}

TEST(Windows, CountFormulaMatchesBruteForce) {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const std::size_t len = rng.below(400), w = 1 + rng.below(60), s = 1 + rng.below(30);
        std::size_t brute = 0;
        for (std::size_t start = 0; start + w <= len; start += s) ++brute;
        EXPECT_EQ(window_count(len, w, s), brute);
    }
}

TEST(Windows, LabelThreshold) {
    auto ws = make_windows(trace("a", 1000, 100, 160), 300, 100, 0.15);
    ASSERT_EQ(ws.size(), 8u);
    EXPECT_EQ(ws.y[0], 1);  // 60/300 = 0.2
    EXPECT_EQ(ws.y[2], 0);  // starts at 200
    EXPECT_EQ(ws.provenance[2], (WindowOrigin{"a", 200}));
    auto any = make_windows(trace("a", 1000, 100, 101), 300, 100, 0.0);
    EXPECT_EQ(any.y[0], 1);
    EXPECT_EQ(any.y[2], 0);
}

TEST(Windows, NeverCrossTraces) {
    auto recs = trace("a", 250);
    auto b = trace("b", 250);
    recs.insert(recs.end(), b.begin(), b.end());
    auto ws = make_windows(recs, 100, 50, 0.1);
    EXPECT_EQ(ws.size(), 2 * window_count(250, 100, 50));
    EXPECT_EQ(ws.trace_ids(), (std::vector<std::string>{"a", "b"}));
}

TEST(Windows, FeatureSelection) {
    auto ws = make_windows(trace("a", 10), 5, 5, 0.1, features_without_gyro());
    EXPECT_EQ(ws.channels(), 4u);
    EXPECT_EQ(ws.x.at(0, 1, 3), static_cast<float>(1 + 6));  // speed channel
}

TEST(Balance, UndersamplesMajority) {
    Rng rng(2);
    auto out = balance_classes(labelled(100, 400), rng);
    EXPECT_EQ(out.positives(), 100u);
    EXPECT_EQ(out.negatives(), 100u);
    auto same = balance_classes(labelled(30, 30), rng);
    EXPECT_EQ(same.positives(), 30u);
    EXPECT_EQ(same.negatives(), 30u);
    EXPECT_THROW(balance_classes(labelled(0, 10), rng), DataError);
}

TEST(Split, LeaveOneOutAndHoldout) {
    std::vector<std::string> ids;
    for (int i = 1; i <= 9; ++i) ids.push_back("PVS" + std::to_string(i));
    auto loo = split_traces(ids, {SplitMode::leave_one_out, {}, 3});
    EXPECT_EQ(loo.train.size(), 8u);
    EXPECT_EQ(loo.val, (std::vector<std::string>{"PVS4"}));
    auto ho = split_traces(ids, {SplitMode::holdout_disjoint, {"PVS7", "PVS8", "PVS9"}, 0});
    EXPECT_EQ(ho.val, (std::vector<std::string>{"PVS7", "PVS8", "PVS9"}));
    EXPECT_THROW(split_traces(ids, {SplitMode::leave_one_out, {}, 9}), DataError);
    EXPECT_THROW(split_traces(ids, {SplitMode::holdout_disjoint, {"nope"}, 0}), DataError);
    EXPECT_THROW(split_traces({"a"}, {SplitMode::holdout_disjoint, {"a"}, 0}), DataError);
}

TEST(Split, WindowSidesAreDisjoint) {
    std::vector<SampleRecord> recs;
    for (const char* id : {"a", "b", "c", "d"}) {
        auto t = trace(id, 300, 10, 40);
        recs.insert(recs.end(), t.begin(), t.end());
    }
    auto ws = make_windows(recs, 50, 25, 0.1);
    auto [train, val] = split(ws, {SplitMode::holdout_disjoint, {"b", "d"}, 0});
    std::set<std::string> tr, va;
    for (const auto& p : train.provenance) tr.insert(p.trace_id);
    for (const auto& p : val.provenance) va.insert(p.trace_id);
    EXPECT_EQ(va, (std::set<std::string>{"b", "d"}));
    for (const auto& id : tr) EXPECT_EQ(va.count(id), 0u);
    EXPECT_EQ(train.size() + val.size(), ws.size());
}

TEST(Prepare, FitsOnTrainTracesOnly) {
    auto recs = trace("a", 400, 50, 120);
    auto b = trace("b", 400, 200, 260);
    for (auto& r : b) r[Feature::acc_x] += 1000.0;
    recs.insert(recs.end(), b.begin(), b.end());
    PrepOptions opts;
    opts.window = 100;
    Rng rng(3);
    auto data = prepare(recs, {SplitMode::holdout_disjoint, {"b"}, 0}, opts, rng);
    EXPECT_EQ(data.stats.fitted_on, "a");
    EXPECT_EQ(data.train.positives(), data.train.negatives());
    float mx = 0;
    for (std::size_t i = 0; i < data.val.size() * 100; ++i) mx = std::max(mx, data.val.x[i * 7]);
    EXPECT_GT(mx, 1.0f);  // validation acc_x lies far outside the train range
}

TEST(WindowCache, RoundTripAndCorruption) {
    auto ws = make_windows(trace("a", 300, 20, 80), 100, 50, 0.15);
    const auto path = std::filesystem::temp_directory_path() / "etlnet_ws_test.etlw";
    save_windows(path, ws);
    EXPECT_EQ(load_windows(path), ws);
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << "ETLX";
    }
    EXPECT_THROW(load_windows(path), FormatError);
    std::filesystem::remove(path);
}
