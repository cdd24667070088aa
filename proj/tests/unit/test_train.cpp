#include <gtest/gtest.h>

#include <cmath>

#include "etlnet/errors.hpp"
#include "etlnet/ops.hpp"
#include "etlnet/synth.hpp"
#include "etlnet/train.hpp"

using namespace etlnet;

namespace {

// Separable windows: positives carry a raised block on one channel.
WindowSet separable(std::size_t n, std::size_t w, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    WindowSet ws;
    ws.window = w;
    ws.stride = w;
    ws.x = Tensor<float>({n, w, c});
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = i % 2 == 0;
        ws.y.push_back(pos ? 1 : 0);
        ws.provenance.push_back({"s", i});
        for (std::size_t t = 0; t < w; ++t)
            for (std::size_t k = 0; k < c; ++k) {
                float v = static_cast<float>(0.2 * rng.normal());
                if (pos && k == 2 && t >= w / 3 && t < w / 3 + 4) v += 2.0f;
                ws.x.at(i, t, k) = v;
            }
    }
    return ws;
}

ModelConfig mini(std::size_t window) {
    ModelConfig cfg;
    cfg.tcn_filters = 4;
    cfg.lstm_hidden = 8;
    cfg.dense_hidden = 8;
    cfg.window = window;
    return cfg;
}

}  // namespace

TEST(Bce, KnownValues) {
    Tensor<double> half({4, 1}, 0.5);
    Tensor<double> y({4}, {1, 0, 1, 0});
    EXPECT_NEAR(bce_loss(half, y).loss, std::log(2.0), 1e-12);
    Tensor<double> exact({4, 1}, {1, 0, 1, 0});
    EXPECT_LE(bce_loss(exact, y).loss, -std::log(1 - 1e-7) + 1e-15);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
    Rng rng(1);
    auto p = rng_uniform<double>(rng, {6, 1}, 0.05, 0.95);
    Tensor<double> y({6}, {1, 0, 0, 1, 1, 0});
    auto g = bce_loss(p, y).grad;
    for (std::size_t i = 0; i < 6; ++i) {
        auto pp = p, pm = p;
        pp[i] += 1e-6;
        pm[i] -= 1e-6;
        const double num = (bce_loss(pp, y).loss - bce_loss(pm, y).loss) / 2e-6;
        EXPECT_NEAR(g[i], num, 1e-6 * std::max(1.0, std::fabs(num)));
    }
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
    Tensor<double> theta({4}, {0, 0, 0, 0});
    std::vector<Tensor<double>> grads{Tensor<double>({4}, {0.3, -2.0, 1e-3, -5e2})};
    AdamState<double> st;
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    adam_step<double>({&theta}, grads, st, cfg);
    EXPECT_NEAR(theta[0], -0.01, 1e-8);
    EXPECT_NEAR(theta[1], 0.01, 1e-8);
    EXPECT_NEAR(theta[2], -0.01, 1e-7);
    EXPECT_NEAR(theta[3], 0.01, 1e-8);
    EXPECT_EQ(st.t, 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    Tensor<double> theta({3}, {1, -2, 3});
    const auto orig = theta;
    AdamState<double> st;
    TrainConfig cfg;
    for (int i = 0; i < 50; ++i) adam_step<double>({&theta}, {Tensor<double>({3})}, st, cfg);
    EXPECT_EQ(theta, orig);
}

TEST(Adam, QuadraticMatchesScalarRecurrence) {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    Tensor<double> theta({1}, {1.0});
    AdamState<double> st;
    double t = 1.0, m = 0, v = 0;
    for (int k = 1; k <= 200; ++k) {
        adam_step<double>({&theta}, {Tensor<double>({1}, {2 * theta[0]})}, st, cfg);
        const double g = 2 * t;
        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double mh = m / (1 - std::pow(cfg.beta1, k)), vh = v / (1 - std::pow(cfg.beta2, k));
        t -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_epsilon);
    }
    EXPECT_NEAR(theta[0], t, 1e-12);
    EXPECT_LT(std::fabs(theta[0]), 0.05);
}

TEST(Metrics, HandConfusionMatrix) {
    auto m = compute_metrics({1, 0, 1, 1}, {0.9, 0.2, 0.4, 0.5});
    EXPECT_EQ(m.confusion, (ConfusionMatrix{2, 0, 1, 1}));
    EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
    EXPECT_DOUBLE_EQ(m.precision, 1.0);
    EXPECT_NEAR(m.recall, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(m.f1, 0.8, 1e-15);
}

TEST(Metrics, F1Identities) {
    EXPECT_NEAR(f1_score(0.9946, 0.9919), 0.99325, 1e-4);
    for (double x : {0.1, 0.5, 0.987}) EXPECT_NEAR(f1_score(x, x), x, 1e-15);
}

TEST(Metrics, ZeroDenominatorsFlagged) {
    auto m = compute_metrics({0, 0, 0}, {0.1, 0.2, 0.3});
    EXPECT_EQ(m.precision, 0.0);
    EXPECT_EQ(m.recall, 0.0);
    EXPECT_EQ(m.f1, 0.0);
    EXPECT_TRUE(m.precision_undefined);
    EXPECT_TRUE(m.recall_undefined);
    EXPECT_TRUE(m.f1_undefined);
    EXPECT_EQ(m.accuracy, 1.0);
}

TEST(Metrics, ThresholdIsInclusive) {
    auto m = compute_metrics({1}, {0.5});
    EXPECT_EQ(m.confusion.tp, 1u);
}

TEST(TrainConfig, Validation) {
    TrainConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), ArgumentError);
}

TEST(Train, WindowMismatchNamesBothValues) {
    Rng rng(2);
    auto model = build_model<double>(mini(20), rng);
    auto ws = separable(8, 24, 7, 3);
    try {
        train(model, ws, ws, TrainConfig{});
        FAIL();
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("20"), std::string::npos);
        EXPECT_NE(msg.find("24"), std::string::npos);
    }
}

TEST(Train, LossDecreasesOnSeparableData) {
    auto ws = separable(256, 24, 7, 4);
    auto val = separable(32, 24, 7, 5);
    Rng rng(6);
    auto model = build_model<double>(mini(24), rng);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;
    cfg.seed = 7;
    auto res = train(model, ws, val, cfg);
    ASSERT_EQ(res.history.size(), 5u);
    for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(res.history[e].train_loss, res.history[e - 1].train_loss);
}

TEST(Train, SameSeedSameHistory) {
    auto ws = separable(40, 20, 7, 8);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 9;
    auto run = [&] {
        Rng rng(10);
        auto model = build_model<double>(mini(20), rng);
        return train(model, ws, ws, cfg).history;
    };
    EXPECT_EQ(run(), run());
}

// Batch-norm running statistics still follow the data at lr=0, so only the
// trainable tensors are frozen.
TEST(Train, ZeroLearningRateFreezesTrainableParameters) {
    auto ws = separable(40, 20, 7, 11);
    auto val = separable(30, 20, 7, 12);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.0;
    Rng rng(13);
    auto model = build_model<double>(mini(20), rng);
    const auto before = model;
    train(model, ws, val, cfg);
    auto a = model.parameters();
    auto b = before.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].trainable) EXPECT_EQ(*a[i].tensor, *b[i].tensor) << a[i].name;
    }
}

TEST(Train, EarlyStopping) {
    auto ws = separable(20, 20, 7, 14);
    // No positives in validation: F1 stays 0 and never improves.
    auto val = ws.subset({1, 3, 5, 7, 9});
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 10;
    cfg.early_stop_patience = 2;
    Rng rng(15);
    auto model = build_model<double>(mini(20), rng);
    auto res = train(model, ws, val, cfg);
    EXPECT_TRUE(res.stopped_early);
    EXPECT_EQ(res.history.size(), 3u);
}

TEST(History, CsvHeader) {
    std::vector<EpochRecord> h(1);
    h[0].epoch = 1;
    h[0].train_loss = 0.5;
    const auto csv = history_csv(h);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_accuracy,val_precision,val_recall,val_f1");
}
