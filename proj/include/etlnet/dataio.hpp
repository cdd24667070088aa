#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "etlnet/rng.hpp"
#include "etlnet/tensor.hpp"

namespace etlnet {

enum class Label { no_bump, bump };
enum class Position { below_suspension, above_suspension, dashboard };
enum class Side { left, right };

std::string_view to_string(Position p);
std::string_view to_string(Side s);
std::string_view to_string(Label l);
Position parse_position(std::string_view text);
Side parse_side(std::string_view text);

// The seven model inputs, in canonical channel order.
enum class Feature : std::size_t { acc_x, acc_y, acc_z, gyro_x, gyro_y, gyro_z, speed };
inline constexpr std::size_t kNumFeatures = 7;

std::string_view to_string(Feature f);
Feature parse_feature(std::string_view text);
const std::vector<Feature>& all_features();
// Accelerometer and speed only.
const std::vector<Feature>& features_without_gyro();
// all_features() for 7 inputs, features_without_gyro() for 4; otherwise ArgumentError.
std::vector<Feature> default_features(std::size_t in_features);

struct SampleRecord {
    double timestamp = 0.0;  // seconds
    std::array<double, kNumFeatures> values{};  // indexed by Feature
    Label label = Label::no_bump;
    Position position = Position::dashboard;
    Side side = Side::right;
    std::string trace_id;

    double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
    double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }
    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

// Maps each canonical field (timestamp, acc_x, ..., speed, label, position,
// side, trace_id) to a source. A source is either one or more header names
// joined by '|' (for label, any listed column being truthy marks a bump) or a
// constant written "const:<value>".
class ColumnMap {
public:
    struct Source {
        std::vector<std::string> columns;
        std::optional<std::string> constant;
    };

    static ColumnMap identity();
    // key=value lines; '#' starts a comment. Unlisted fields keep identity mapping.
    static ColumnMap parse(std::string_view text);
    static ColumnMap load(const std::filesystem::path& path);

    void set(const std::string& field, std::string_view spec);
    const Source& source(const std::string& field) const;

    static const std::vector<std::string>& canonical_fields();

private:
    std::map<std::string, Source> sources_;
};

std::vector<SampleRecord> parse_pvs_csv(std::string_view text, Position position, Side side,
                                        const ColumnMap& map = ColumnMap::identity(), std::string_view origin = "<csv>");

std::vector<SampleRecord> load_pvs_csv(const std::filesystem::path& path, Position position, Side side,
                                       const ColumnMap& map = ColumnMap::identity());

// Canonical-column CSV with round-trip (shortest exact) number formatting.
std::string format_csv(const std::vector<SampleRecord>& records);
void write_csv(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

enum class NormScheme { minmax, zscore };
std::string_view to_string(NormScheme s);
NormScheme parse_norm_scheme(std::string_view text);

struct NormStats {
    NormScheme scheme = NormScheme::minmax;
    std::array<double, kNumFeatures> lo{};  // min or mean
    std::array<double, kNumFeatures> hi{};  // max or std
    std::string fitted_on;
};

NormStats fit_normalizer(const std::vector<SampleRecord>& records, NormScheme scheme, std::string fitted_on = "");
std::vector<SampleRecord> apply_normalizer(const std::vector<SampleRecord>& records, const NormStats& stats);

// ---------------------------------------------------------------------------
// Windowing, balancing, splitting
// ---------------------------------------------------------------------------

struct WindowOrigin {
    std::string trace_id;
    std::uint64_t start = 0;
    friend bool operator==(const WindowOrigin&, const WindowOrigin&) = default;
};

struct WindowSet {
    Tensor<float> x;              // [N x W x C]
    std::vector<std::uint8_t> y;  // N labels in {0, 1}
    std::size_t window = 0;
    std::size_t stride = 0;
    double label_threshold = 0.0;
    std::vector<WindowOrigin> provenance;

    std::size_t size() const { return y.size(); }
    std::size_t channels() const { return x.rank() == 3 ? x.dim(2) : 0; }
    std::size_t positives() const;
    std::size_t negatives() const { return size() - positives(); }
    std::vector<std::string> trace_ids() const;  // first-appearance order
    WindowSet subset(const std::vector<std::size_t>& indices) const;

    friend bool operator==(const WindowSet&, const WindowSet&) = default;
};

inline std::size_t window_count(std::size_t len, std::size_t window, std::size_t stride) {
    return len < window ? 0 : (len - window) / stride + 1;
}

// Windows never cross trace boundaries. A window is positive iff
// bump_samples / W >= threshold (threshold > 0) or it holds any bump sample
// (threshold == 0).
WindowSet make_windows(const std::vector<SampleRecord>& records, std::size_t window, std::size_t stride,
                       double label_threshold, const std::vector<Feature>& features = all_features());

// Random undersampling of the majority class, then a shuffle.
WindowSet balance_classes(const WindowSet& ws, Rng& rng);

enum class SplitMode { holdout_disjoint, leave_one_out };

struct SplitSpec {
    SplitMode mode = SplitMode::holdout_disjoint;
    std::set<std::string> holdout;
    std::size_t loo_index = 0;
};

struct TraceSplit {
    std::vector<std::string> train, val;
};

// trace_ids in first-appearance order.
TraceSplit split_traces(const std::vector<std::string>& trace_ids, const SplitSpec& spec);

std::pair<WindowSet, WindowSet> split(const WindowSet& windows, const SplitSpec& spec);

struct PrepOptions {
    std::size_t window = 300;
    std::size_t stride = 0;  // 0 -> window / 2
    double label_threshold = 0.15;
    NormScheme scheme = NormScheme::minmax;
    std::vector<Feature> features = all_features();
    bool balance = true;

    std::size_t effective_stride() const { return stride ? stride : std::max<std::size_t>(1, window / 2); }
};

struct PreparedData {
    WindowSet train, val;
    NormStats stats;
};

// Split records by trace, fit normalization on the train side only, window
// both sides, then balance the train side.
PreparedData prepare(const std::vector<SampleRecord>& records, const SplitSpec& spec, const PrepOptions& opts,
                     Rng& rng);

// "ETLW" cache: W, S, theta, C, N header, x as f32, y as bytes, then a
// provenance trailer.
void save_windows(const std::filesystem::path& path, const WindowSet& ws);
WindowSet load_windows(const std::filesystem::path& path);

}  // namespace etlnet
