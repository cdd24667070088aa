#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

#include "../common/binary_io.hpp"
#include "etlnet/dataio.hpp"

namespace etlnet {

namespace {

// Records grouped into contiguous recordings, in first-appearance order. One
// trace recorded at several positions yields one group per position/side.
std::vector<std::pair<std::string, std::vector<const SampleRecord*>>> group_by_trace(
    const std::vector<SampleRecord>& records) {
    std::vector<std::pair<std::string, std::vector<const SampleRecord*>>> groups;
    std::map<std::tuple<std::string, Position, Side>, std::size_t> index;
    for (const auto& r : records) {
        auto [it, inserted] = index.try_emplace({r.trace_id, r.position, r.side}, groups.size());
        if (inserted) groups.push_back({r.trace_id, {}});
        groups[it->second].second.push_back(&r);
    }
    return groups;
}

}  // namespace

std::size_t WindowSet::positives() const {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
}

std::vector<std::string> WindowSet::trace_ids() const {
    std::vector<std::string> ids;
    for (const auto& p : provenance)
        if (std::find(ids.begin(), ids.end(), p.trace_id) == ids.end()) ids.push_back(p.trace_id);
    return ids;
}

WindowSet WindowSet::subset(const std::vector<std::size_t>& indices) const {
    WindowSet out;
    out.window = window;
    out.stride = stride;
    out.label_threshold = label_threshold;
    const std::size_t c = channels(), per = window * c;
    std::vector<float> data;
    data.reserve(indices.size() * per);
    for (auto i : indices) {
        if (i >= size()) throw ArgumentError("WindowSet::subset index out of range");
        data.insert(data.end(), x.ptr() + i * per, x.ptr() + (i + 1) * per);
        out.y.push_back(y[i]);
        out.provenance.push_back(provenance[i]);
    }
    out.x = Tensor<float>({indices.size(), window, c}, std::move(data));
    return out;
}

WindowSet make_windows(const std::vector<SampleRecord>& records, std::size_t window, std::size_t stride,
                       double label_threshold, const std::vector<Feature>& features) {
    if (window < 1 || stride < 1) throw ArgumentError("make_windows: window and stride must be >= 1");
    if (!(label_threshold >= 0.0 && label_threshold <= 1.0)) {
        throw ArgumentError("make_windows: label threshold must be in [0, 1]");
    }
    if (features.empty()) throw ArgumentError("make_windows: no features selected");
    WindowSet ws;
    ws.window = window;
    ws.stride = stride;
    ws.label_threshold = label_threshold;
    const std::size_t c = features.size();
    std::vector<float> data;
    for (const auto& [trace, rows] : group_by_trace(records)) {
        const std::size_t n = window_count(rows.size(), window, stride);
        // Prefix sums of bump labels make each window's count O(1).
        std::vector<std::size_t> bumps(rows.size() + 1, 0);
        for (std::size_t i = 0; i < rows.size(); ++i) bumps[i + 1] = bumps[i] + (rows[i]->label == Label::bump);
        for (std::size_t w = 0; w < n; ++w) {
            const std::size_t start = w * stride;
            for (std::size_t t = start; t < start + window; ++t)
                for (auto f : features) data.push_back(static_cast<float>((*rows[t])[f]));
            const std::size_t count = bumps[start + window] - bumps[start];
            const bool positive = label_threshold > 0.0
                                      ? static_cast<double>(count) / static_cast<double>(window) >= label_threshold
                                      : count >= 1;
            ws.y.push_back(positive ? 1 : 0);
            ws.provenance.push_back({trace, start});
        }
    }
    ws.x = Tensor<float>({ws.y.size(), window, c}, std::move(data));
    return ws;
}

WindowSet balance_classes(const WindowSet& ws, Rng& rng) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < ws.size(); ++i) (ws.y[i] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) {
        throw DataError("balance_classes: need both classes, got " + std::to_string(pos.size()) + " positive and " +
                        std::to_string(neg.size()) + " negative windows");
    }
    shuffle(pos.begin(), pos.end(), rng);
    shuffle(neg.begin(), neg.end(), rng);
    const std::size_t keep = std::min(pos.size(), neg.size());
    std::vector<std::size_t> chosen(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(keep));
    chosen.insert(chosen.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(keep));
    shuffle(chosen.begin(), chosen.end(), rng);
    return ws.subset(chosen);
}

TraceSplit split_traces(const std::vector<std::string>& trace_ids, const SplitSpec& spec) {
    TraceSplit out;
    if (spec.mode == SplitMode::leave_one_out) {
        if (spec.loo_index >= trace_ids.size()) {
            throw DataError("leave-one-out index " + std::to_string(spec.loo_index) + " out of range for " +
                            std::to_string(trace_ids.size()) + " traces");
        }
        for (std::size_t i = 0; i < trace_ids.size(); ++i)
            (i == spec.loo_index ? out.val : out.train).push_back(trace_ids[i]);
    } else {
        for (const auto& id : spec.holdout) {
            if (std::find(trace_ids.begin(), trace_ids.end(), id) == trace_ids.end()) {
                throw DataError("holdout trace '" + id + "' not present in the data");
            }
        }
        for (const auto& id : trace_ids) (spec.holdout.count(id) ? out.val : out.train).push_back(id);
    }
    if (out.train.empty()) throw DataError("split leaves the training side empty");
    if (out.val.empty()) throw DataError("split leaves the validation side empty");
    return out;
}

std::pair<WindowSet, WindowSet> split(const WindowSet& windows, const SplitSpec& spec) {
    const auto traces = split_traces(windows.trace_ids(), spec);
    const std::set<std::string> val_ids(traces.val.begin(), traces.val.end());
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < windows.size(); ++i) (val_ids.count(windows.provenance[i].trace_id) ? va : tr).push_back(i);
    if (tr.empty() || va.empty()) throw DataError("split produced an empty side (no windows)");
    return {windows.subset(tr), windows.subset(va)};
}

PreparedData prepare(const std::vector<SampleRecord>& records, const SplitSpec& spec, const PrepOptions& opts,
                     Rng& rng) {
    std::vector<std::string> ids;
    for (const auto& g : group_by_trace(records))
        if (std::find(ids.begin(), ids.end(), g.first) == ids.end()) ids.push_back(g.first);
    const auto traces = split_traces(ids, spec);
    const std::set<std::string> val_ids(traces.val.begin(), traces.val.end());
    std::vector<SampleRecord> train_rec, val_rec;
    for (const auto& r : records) (val_ids.count(r.trace_id) ? val_rec : train_rec).push_back(r);

    std::string fitted_on;
    for (const auto& id : traces.train) fitted_on += (fitted_on.empty() ? "" : ",") + id;
    PreparedData out;
    out.stats = fit_normalizer(train_rec, opts.scheme, fitted_on);
    const std::size_t stride = opts.effective_stride();
    out.train = make_windows(apply_normalizer(train_rec, out.stats), opts.window, stride, opts.label_threshold,
                             opts.features);
    out.val = make_windows(apply_normalizer(val_rec, out.stats), opts.window, stride, opts.label_threshold,
                           opts.features);
    if (out.train.size() == 0) throw DataError("training traces are shorter than one window");
    if (out.val.size() == 0) throw DataError("validation traces are shorter than one window");
    if (opts.balance) out.train = balance_classes(out.train, rng);
    return out;
}

void save_windows(const std::filesystem::path& path, const WindowSet& ws) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out.write("ETLW", 4);
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ws.window));
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ws.stride));
    binio::put_f64(out, ws.label_threshold);
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ws.channels()));
    binio::put_le<std::uint64_t>(out, ws.size());
    for (float v : ws.x.data()) binio::put_f32(out, v);
    out.write(reinterpret_cast<const char*>(ws.y.data()), static_cast<std::streamsize>(ws.y.size()));
    for (const auto& p : ws.provenance) {
        binio::put_string(out, p.trace_id);
        binio::put_le<std::uint64_t>(out, p.start);
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

WindowSet load_windows(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open window cache '" + path.string() + "'");
    binio::expect_magic(in, "ETLW", path.string());
    WindowSet ws;
    ws.window = binio::get_le<std::uint32_t>(in, "window");
    ws.stride = binio::get_le<std::uint32_t>(in, "stride");
    ws.label_threshold = binio::get_f64(in, "label threshold");
    const std::size_t c = binio::get_le<std::uint32_t>(in, "channels");
    const std::uint64_t n = binio::get_le<std::uint64_t>(in, "window count");
    if (ws.window == 0 || c == 0 || n > (std::uint64_t{1} << 40) / (ws.window * c + 1)) {
        throw FormatError(path.string() + ": implausible window cache header");
    }
    std::vector<float> data(n * ws.window * c);
    for (auto& v : data) v = binio::get_f32(in, "window values");
    ws.x = Tensor<float>({n, ws.window, c}, std::move(data));
    ws.y.resize(n);
    if (n && !in.read(reinterpret_cast<char*>(ws.y.data()), static_cast<std::streamsize>(n))) {
        throw FormatError(path.string() + ": truncated labels");
    }
    for (auto v : ws.y)
        if (v > 1) throw FormatError(path.string() + ": label byte outside {0,1}");
    ws.provenance.resize(n);
    for (auto& p : ws.provenance) {
        p.trace_id = binio::get_string(in, "provenance trace id");
        p.start = binio::get_le<std::uint64_t>(in, "provenance start");
    }
    return ws;
}

}  // namespace etlnet
