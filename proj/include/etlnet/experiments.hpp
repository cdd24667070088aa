#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etlnet/dataio.hpp"
#include "etlnet/model.hpp"
#include "etlnet/synth.hpp"
#include "etlnet/train.hpp"

namespace etlnet {

enum class DataSource { synth, pvs };
std::string_view to_string(DataSource s);
DataSource parse_data_source(std::string_view text);

struct DataSpec {
    DataSource source = DataSource::synth;
    // Synthetic traces are named <trace_id>1 .. <trace_id>N ("car1", ...).
    SynthConfig synth = [] {
        SynthConfig s;
        s.trace_id = "car";
        return s;
    }();
    std::size_t synth_traces = 4;
    std::vector<std::filesystem::path> pvs_files;  // one trace per file
    std::optional<std::filesystem::path> column_map;
    Side side = Side::right;
    std::vector<Position> positions{Position::dashboard};
    SplitSpec split{SplitMode::holdout_disjoint, {"car4"}, 0};
    PrepOptions prep;  // prep.window is overridden per cell
};

struct SweepSpec {
    std::vector<VariantName> variants{VariantName::etlnet};
    std::vector<std::size_t> windows{100, 200, 300, 400, 500};
    // One cell per car: each trace in turn is held out (leave-one-out).
    bool per_car = false;
    DataSpec data;
    ModelConfig model;  // base; variant, window and in_features are set per cell
    TrainConfig train;  // train.seed is derived per cell
    std::uint64_t seed = 0;
    Precision precision = Precision::standard;
    std::size_t workers = 1;

    void validate() const;  // throws ConfigError
};

inline constexpr const char* kAllCars = "all";

struct ResultRow {
    std::string variant;
    std::size_t window = 0;
    std::string position;
    std::string car;
    bool ok = false;
    std::string reason;  // failure message when !ok
    MetricsReport metrics;
    std::uint64_t trainable_params = 0;
    std::uint64_t total_params = 0;
    std::size_t in_features = 0;
    std::size_t train_windows = 0;
    std::size_t val_windows = 0;
    std::size_t epochs = 0;
    double final_train_loss = 0.0;
    std::uint64_t seed = 0;

    std::string key() const;  // "variant|window|position|car"
    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ResultTable {
    std::vector<ResultRow> rows;
    std::map<std::string, std::string> metadata;

    std::size_t failed() const;
    friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

// Per-cell seed from the cell key, so cells never perturb each other.
std::uint64_t cell_seed(std::uint64_t sweep_seed, const std::string& key);

// Model config a cell trains: base config with the variant's input width.
ModelConfig cell_model_config(const SweepSpec& spec, VariantName variant, std::size_t window);

// Resolves the data source to records (errors surface as ConfigError/DataError
// before any training starts).
std::vector<SampleRecord> load_sweep_data(const SweepSpec& spec);

ResultTable run_sweep(const SweepSpec& spec);
ResultTable run_sweep(const SweepSpec& spec, const std::vector<SampleRecord>& records);

// Six ablation models across spec.windows.
ResultTable run_ablation(SweepSpec spec);

enum class AggregateKey { car, position };
// Mean of each metric over the collapsed key; failed rows are left out.
ResultTable aggregate_by(const ResultTable& table, AggregateKey key);

// Percentage with two decimals, half-up ("99.325" -> "99.33").
std::string format_percent(double fraction);

enum class ReportFormat { csv, markdown };
std::string emit_report(const ResultTable& table, ReportFormat format);
ResultTable parse_report_csv(std::string_view text);

}  // namespace etlnet
