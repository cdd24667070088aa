#include <gtest/gtest.h>

#include "etlnet/errors.hpp"
#include "etlnet/synth.hpp"

using namespace etlnet;

TEST(Synth, QuietTraceIsFlat) {
    SynthConfig cfg;
    cfg.noise_std = 0.0;
    cfg.bump_count = 0;
    cfg.duration_samples = 500;
    auto recs = generate_trace(cfg);
    ASSERT_EQ(recs.size(), 500u);
    for (const auto& r : recs) {
        EXPECT_EQ(r[Feature::acc_z], kGravity);
        EXPECT_EQ(r.label, Label::no_bump);
        EXPECT_EQ(r[Feature::speed], cfg.base_speed);
    }
    EXPECT_DOUBLE_EQ(recs[100].timestamp, 1.0);
}

TEST(Synth, BumpSampleCountIsExact) {
    SynthConfig cfg;
    cfg.bump_count = 3;
    cfg.bump_len_samples = 40;
    cfg.duration_samples = 2000;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cfg.seed = seed;
        auto recs = generate_trace(cfg);
        std::size_t n = 0;
        for (const auto& r : recs) n += r.label == Label::bump;
        EXPECT_EQ(n, 120u);
    }
}

TEST(Synth, BumpsNeverOverlapOrTouch) {
    SynthConfig cfg;
    cfg.bump_count = 10;
    cfg.bump_len_samples = 50;
    cfg.duration_samples = 1000;  // (2*10-1)*50 = 950: nearly full
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        auto starts = place_bumps(cfg, rng);
        ASSERT_EQ(starts.size(), 10u);
        for (std::size_t i = 1; i < starts.size(); ++i) EXPECT_GE(starts[i], starts[i - 1] + 2 * 50);
        EXPECT_LE(starts.back() + 50, 1000u);
    }
}

TEST(Synth, InfeasibleLayoutThrows) {
    SynthConfig cfg;
    cfg.bump_count = 10;
    cfg.bump_len_samples = 60;
    cfg.duration_samples = 1000;
    EXPECT_THROW(generate_trace(cfg), ArgumentError);
}

TEST(Synth, SameSeedSameTrace) {
    SynthConfig cfg;
    cfg.seed = 42;
    EXPECT_EQ(generate_trace(cfg), generate_trace(cfg));
    SynthConfig other = cfg;
    other.seed = 43;
    EXPECT_NE(generate_trace(cfg), generate_trace(other));
}

TEST(Synth, BumpRaisesVerticalAcceleration) {
    SynthConfig cfg;
    cfg.noise_std = 0.0;
    cfg.bump_count = 1;
    cfg.duration_samples = 300;
    auto recs = generate_trace(cfg);
    double peak = 0;
    for (const auto& r : recs) {
        if (r.label == Label::bump) peak = std::max(peak, r[Feature::acc_z] - kGravity);
        else EXPECT_EQ(r[Feature::acc_z], kGravity);
    }
    EXPECT_NEAR(peak, cfg.bump_amplitude, 1e-12);
}

TEST(Synth, MultiPositionTracesShareLayout) {
    SynthConfig cfg;
    cfg.duration_samples = 1000;
    cfg.bump_count = 4;
    cfg.trace_id = "car";
    const std::vector<Position> pos{Position::below_suspension, Position::dashboard};
    auto recs = generate_traces(cfg, 2, pos);
    ASSERT_EQ(recs.size(), 2u * 2u * 1000u);
    // per trace, the two positions carry identical labels
    for (std::size_t t = 0; t < 2; ++t) {
        const std::size_t base = t * 2000;
        EXPECT_EQ(recs[base].trace_id, "car" + std::to_string(t + 1));
        EXPECT_EQ(recs[base].position, Position::below_suspension);
        EXPECT_EQ(recs[base + 1000].position, Position::dashboard);
        for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(recs[base + i].label, recs[base + 1000 + i].label);
    }
    EXPECT_GT(position_gain(Position::below_suspension), position_gain(Position::above_suspension));
    EXPECT_GT(position_gain(Position::above_suspension), position_gain(Position::dashboard));
}
