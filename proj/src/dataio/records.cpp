#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "../common/text.hpp"
#include "etlnet/dataio.hpp"

namespace etlnet {

namespace {

constexpr std::string_view kFeatureNames[kNumFeatures] = {"acc_x",  "acc_y",  "acc_z", "gyro_x",
                                                          "gyro_y", "gyro_z", "speed"};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool truthy_label(std::string_view v, bool& ok) {
    v = text::trim(v);
    ok = true;
    if (v == "bump" || v == "true" || v == "yes" || v == "speed_bump") return true;
    if (v.empty() || v == "no_bump" || v == "false" || v == "no") return false;
    if (auto d = text::parse_double(v)) return *d != 0.0;
    ok = false;
    return false;
}

std::string_view unquote(std::string_view s) {
    s = text::trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

}  // namespace

std::string_view to_string(Position p) {
    switch (p) {
        case Position::below_suspension: return "below_suspension";
        case Position::above_suspension: return "above_suspension";
        case Position::dashboard: return "dashboard";
    }
    return "unknown";
}

std::string_view to_string(Side s) { return s == Side::left ? "left" : "right"; }
std::string_view to_string(Label l) { return l == Label::bump ? "bump" : "no_bump"; }

Position parse_position(std::string_view text) {
    if (text == "below_suspension") return Position::below_suspension;
    if (text == "above_suspension") return Position::above_suspension;
    if (text == "dashboard") return Position::dashboard;
    throw ArgumentError("unknown sensor position '" + std::string(text) + "'");
}

Side parse_side(std::string_view text) {
    if (text == "left") return Side::left;
    if (text == "right") return Side::right;
    throw ArgumentError("unknown side '" + std::string(text) + "'");
}

std::string_view to_string(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

Feature parse_feature(std::string_view text) {
    for (std::size_t i = 0; i < kNumFeatures; ++i)
        if (kFeatureNames[i] == text) return static_cast<Feature>(i);
    throw ArgumentError("unknown feature '" + std::string(text) + "'");
}

const std::vector<Feature>& all_features() {
    static const std::vector<Feature> f{Feature::acc_x,  Feature::acc_y,  Feature::acc_z, Feature::gyro_x,
                                        Feature::gyro_y, Feature::gyro_z, Feature::speed};
    return f;
}

const std::vector<Feature>& features_without_gyro() {
    static const std::vector<Feature> f{Feature::acc_x, Feature::acc_y, Feature::acc_z, Feature::speed};
    return f;
}

std::vector<Feature> default_features(std::size_t in_features) {
    if (in_features == all_features().size()) return all_features();
    if (in_features == features_without_gyro().size()) return features_without_gyro();
    throw ArgumentError("no default feature set with " + std::to_string(in_features) + " inputs (expected 7 or 4)");
}

const std::vector<std::string>& ColumnMap::canonical_fields() {
    static const std::vector<std::string> fields{"timestamp", "acc_x", "acc_y", "acc_z",    "gyro_x", "gyro_y",
                                                 "gyro_z",    "speed", "label", "position", "side",   "trace_id"};
    return fields;
}

ColumnMap ColumnMap::identity() {
    ColumnMap m;
    for (const auto& f : canonical_fields()) m.sources_[f] = Source{{f}, std::nullopt};
    return m;
}

void ColumnMap::set(const std::string& field, std::string_view spec) {
    auto it = sources_.find(field);
    if (it == sources_.end()) throw FormatError("column map: unknown field '" + field + "'");
    spec = text::trim(spec);
    Source src;
    if (spec.starts_with("const:")) {
        src.constant = std::string(spec.substr(6));
    } else {
        for (auto part : text::split(spec, '|')) {
            part = text::trim(part);
            if (!part.empty()) src.columns.emplace_back(part);
        }
        if (src.columns.empty()) throw FormatError("column map: field '" + field + "' maps to no column");
        if (src.columns.size() > 1 && field != "label") {
            throw FormatError("column map: only 'label' may combine several columns, got '" + std::string(spec) + "'");
        }
    }
    it->second = std::move(src);
}

const ColumnMap::Source& ColumnMap::source(const std::string& field) const { return sources_.at(field); }

ColumnMap ColumnMap::parse(std::string_view content) {
    ColumnMap m = identity();
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError("column map line " + std::to_string(line_no) + ": expected key=value");
        }
        m.set(std::string(text::trim(line.substr(0, eq))), line.substr(eq + 1));
    }
    return m;
}

ColumnMap ColumnMap::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::vector<SampleRecord> parse_pvs_csv(std::string_view content, Position position, Side side, const ColumnMap& map,
                                        std::string_view origin) {
    const auto lines = text::split(content, '\n');
    std::size_t header_line = 0;
    while (header_line < lines.size() && text::trim(lines[header_line]).empty()) ++header_line;
    if (header_line == lines.size()) throw FormatError(std::string(origin) + ": missing header row");

    std::unordered_map<std::string, std::size_t> header;
    {
        const auto cols = text::split(lines[header_line], ',');
        for (std::size_t i = 0; i < cols.size(); ++i) header.emplace(std::string(unquote(cols[i])), i);
    }

    // Metadata fields may be absent under the identity map; they then default
    // to the requested position/side and the file origin as trace id.
    const std::set<std::string> optional_fields{"position", "side", "trace_id"};
    struct Resolved {
        std::vector<std::size_t> cols;
        std::optional<std::string> constant;
    };
    std::map<std::string, Resolved> resolved;
    for (const auto& field : ColumnMap::canonical_fields()) {
        const auto& src = map.source(field);
        Resolved r;
        r.constant = src.constant;
        for (const auto& col : src.columns) {
            auto it = header.find(col);
            if (it == header.end()) {
                if (optional_fields.count(field) && src.columns.size() == 1 && col == field) {
                    r.constant = field == "position" ? std::string(to_string(position))
                                 : field == "side"   ? std::string(to_string(side))
                                                     : std::string(origin);
                    break;
                }
                throw FormatError(std::string(origin) + ": missing column '" + col + "' (for field '" + field + "')");
            }
            r.cols.push_back(it->second);
        }
        resolved[field] = std::move(r);
    }

    std::vector<SampleRecord> out;
    std::map<std::string, std::pair<double, std::size_t>> last_ts;
    for (std::size_t li = header_line + 1; li < lines.size(); ++li) {
        if (text::trim(lines[li]).empty()) continue;
        const std::size_t line_no = li + 1;
        const auto cells = text::split(lines[li], ',');
        auto cell = [&](const std::string& field, std::size_t k = 0) -> std::string_view {
            const auto& r = resolved.at(field);
            if (r.constant) return *r.constant;
            const std::size_t idx = r.cols[k];
            if (idx >= cells.size()) {
                throw FormatError(std::string(origin) + ": line " + std::to_string(line_no) + ": too few fields (no '" +
                                  field + "')");
            }
            return unquote(cells[idx]);
        };
        auto number = [&](const std::string& field) {
            const auto v = cell(field);
            auto d = text::parse_double(v);
            if (!d || !std::isfinite(*d)) {
                throw FormatError(std::string(origin) + ": line " + std::to_string(line_no) + ": non-numeric value '" +
                                  std::string(v) + "' in column '" + field + "'");
            }
            return *d;
        };

        SampleRecord rec;
        try {
            rec.position = parse_position(cell("position"));
            rec.side = parse_side(cell("side"));
        } catch (const ArgumentError& e) {
            throw FormatError(std::string(origin) + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        if (rec.position != position || rec.side != side) continue;

        rec.timestamp = number("timestamp");
        for (std::size_t f = 0; f < kNumFeatures; ++f) rec.values[f] = number(std::string(kFeatureNames[f]));
        bool bump = false;
        const auto& label_src = resolved.at("label");
        const std::size_t n_label = label_src.constant ? 1 : label_src.cols.size();
        for (std::size_t k = 0; k < n_label; ++k) {
            bool ok = true;
            const auto v = cell("label", k);
            bump = truthy_label(v, ok) || bump;
            if (!ok) {
                throw FormatError(std::string(origin) + ": line " + std::to_string(line_no) + ": unrecognised label '" +
                                  std::string(v) + "'");
            }
        }
        rec.label = bump ? Label::bump : Label::no_bump;
        rec.trace_id = std::string(cell("trace_id"));

        if (rec[Feature::speed] < 0.0) {
            throw DataError(std::string(origin) + ": line " + std::to_string(line_no) + ": negative speed");
        }
        auto [it, inserted] = last_ts.try_emplace(rec.trace_id, rec.timestamp, line_no);
        if (!inserted) {
            if (!(rec.timestamp > it->second.first)) {
                throw DataError(std::string(origin) + ": line " + std::to_string(line_no) + ": timestamp " +
                                text::format_double(rec.timestamp) + " is not after line " +
                                std::to_string(it->second.second) + " in trace '" + rec.trace_id + "'");
            }
            it->second = {rec.timestamp, line_no};
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<SampleRecord> load_pvs_csv(const std::filesystem::path& path, Position position, Side side,
                                       const ColumnMap& map) {
    return parse_pvs_csv(read_file(path), position, side, map, path.stem().string());
}

std::string format_csv(const std::vector<SampleRecord>& records) {
    std::string out = "timestamp";
    for (auto name : kFeatureNames) out += "," + std::string(name);
    out += ",label,position,side,trace_id\n";
    for (const auto& r : records) {
        out += text::format_double(r.timestamp);
        for (double v : r.values) out += "," + text::format_double(v);
        out += ",";
        out += to_string(r.label);
        out += ",";
        out += to_string(r.position);
        out += ",";
        out += to_string(r.side);
        out += "," + r.trace_id + "\n";
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << format_csv(records);
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

}  // namespace etlnet
