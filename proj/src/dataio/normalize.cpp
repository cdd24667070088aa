#include <algorithm>
#include <cmath>

#include "etlnet/dataio.hpp"

namespace etlnet {

std::string_view to_string(NormScheme s) { return s == NormScheme::minmax ? "minmax" : "zscore"; }

NormScheme parse_norm_scheme(std::string_view text) {
    if (text == "minmax") return NormScheme::minmax;
    if (text == "zscore") return NormScheme::zscore;
    throw ArgumentError("unknown normalization scheme '" + std::string(text) + "' (expected minmax or zscore)");
}

NormStats fit_normalizer(const std::vector<SampleRecord>& records, NormScheme scheme, std::string fitted_on) {
    if (records.empty()) throw ArgumentError("fit_normalizer: no records");
    if (scheme == NormScheme::zscore && records.size() < 2) {
        throw ArgumentError("fit_normalizer: zscore needs at least 2 records");
    }
    NormStats s;
    s.scheme = scheme;
    s.fitted_on = std::move(fitted_on);
    if (scheme == NormScheme::minmax) {
        s.lo = records.front().values;
        s.hi = records.front().values;
        for (const auto& r : records)
            for (std::size_t f = 0; f < kNumFeatures; ++f) {
                s.lo[f] = std::min(s.lo[f], r.values[f]);
                s.hi[f] = std::max(s.hi[f], r.values[f]);
            }
    } else {
        const double n = static_cast<double>(records.size());
        for (const auto& r : records)
            for (std::size_t f = 0; f < kNumFeatures; ++f) s.lo[f] += r.values[f];
        for (auto& m : s.lo) m /= n;
        for (const auto& r : records)
            for (std::size_t f = 0; f < kNumFeatures; ++f) {
                const double d = r.values[f] - s.lo[f];
                s.hi[f] += d * d;
            }
        for (auto& v : s.hi) v = std::sqrt(v / n);
    }
    return s;
}

std::vector<SampleRecord> apply_normalizer(const std::vector<SampleRecord>& records, const NormStats& stats) {
    std::vector<SampleRecord> out = records;
    for (auto& r : out)
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            // Degenerate features (zero range / zero spread) map to 0.
            if (stats.scheme == NormScheme::minmax) {
                const double range = stats.hi[f] - stats.lo[f];
                r.values[f] = range > 0.0 ? (r.values[f] - stats.lo[f]) / range : 0.0;
            } else {
                r.values[f] = stats.hi[f] > 0.0 ? (r.values[f] - stats.lo[f]) / stats.hi[f] : 0.0;
            }
        }
    return out;
}

}  // namespace etlnet
