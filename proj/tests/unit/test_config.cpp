#include <gtest/gtest.h>

#include "etlnet/config.hpp"
#include "etlnet/errors.hpp"

using namespace etlnet;

TEST(RunConfig, TextRoundTrip) {
    RunConfig cfg;
    cfg.seed = 77;
    cfg.model.tcn_filters = 8;
    cfg.model.dilations = {1, 2};
    cfg.train.learning_rate = 0.1 + 0.2;
    cfg.train.early_stop_patience = 3;
    cfg.data.positions = {Position::dashboard, Position::above_suspension};
    cfg.data.split.holdout = {"car3", "car4"};
    cfg.variants = {VariantName::tcn3, VariantName::etlnet};
    cfg.windows = {100, 400};
    cfg.per_car = true;
    const auto back = apply_settings(RunConfig{}, parse_settings(run_config_to_text(cfg)));
    EXPECT_EQ(run_config_to_kv(back), run_config_to_kv(cfg));
    EXPECT_EQ(back.model, cfg.model);
    EXPECT_EQ(back.train, cfg.train);
}

TEST(RunConfig, UnknownKeyRejected) {
    EXPECT_THROW(apply_settings(RunConfig{}, {{"model.kernal", "3"}}), ConfigError);
}

TEST(RunConfig, MalformedValueNamesKey) {
    try {
        apply_settings(RunConfig{}, {{"train.epochs", "ten"}});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("train.epochs"), std::string::npos);
    }
    EXPECT_THROW(apply_settings(RunConfig{}, {{"data.source", "s3"}}), ConfigError);
}

TEST(RunConfig, InputWidthFollowsVariant) {
    auto cfg = apply_settings(RunConfig{}, {{"model.variant", "reduced_feature"}});
    EXPECT_EQ(cfg.model.in_features, 4u);
    cfg = apply_settings(RunConfig{}, {{"model.variant", "reduced_feature"}, {"model.in_features", "6"}});
    EXPECT_EQ(cfg.model.in_features, 6u);
}

TEST(RunConfig, CommentsAndBlankLines) {
    const auto kv = parse_settings("# header\n\nseed = 4  # trailing\nmodel.kernel=2\n");
    EXPECT_EQ(kv.at("seed"), "4");
    EXPECT_EQ(kv.at("model.kernel"), "2");
    EXPECT_THROW(parse_settings("no equals sign\n"), ConfigError);
}

TEST(RunConfig, PatienceNone) {
    auto cfg = apply_settings(RunConfig{}, {{"train.patience", "5"}});
    EXPECT_EQ(cfg.train.early_stop_patience, 5u);
    cfg = apply_settings(cfg, {{"train.patience", "none"}});
    EXPECT_FALSE(cfg.train.early_stop_patience.has_value());
}
