#include "etlnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "etlnet/errors.hpp"

namespace etlnet {

void SynthConfig::validate() const {
    if (bump_len_samples < 1) throw ArgumentError("synth: bump_len_samples must be >= 1");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ArgumentError("synth: noise_std must be >= 0");
    if (!(base_speed >= 0.0) || !std::isfinite(base_speed)) throw ArgumentError("synth: base_speed must be >= 0");
    if (!(sample_rate > 0.0)) throw ArgumentError("synth: sample_rate must be > 0");
    if (!std::isfinite(bump_amplitude) || !std::isfinite(gyro_amplitude)) {
        throw ArgumentError("synth: amplitudes must be finite");
    }
    if (bump_count > 0) {
        const std::size_t need = (2 * bump_count - 1) * bump_len_samples;
        if (need > duration_samples) {
            throw ArgumentError("synth: " + std::to_string(bump_count) + " bumps of " +
                                std::to_string(bump_len_samples) + " samples with equal gaps need " +
                                std::to_string(need) + " samples, duration is " + std::to_string(duration_samples));
        }
    }
}

double position_gain(Position p) {
    switch (p) {
        case Position::below_suspension: return 1.5;
        case Position::above_suspension: return 1.0;
        case Position::dashboard: return 0.8;
    }
    return 1.0;
}

std::vector<std::size_t> place_bumps(const SynthConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t n = cfg.bump_count, len = cfg.bump_len_samples;
    if (n == 0) return {};
    // Sorted uniform offsets into the slack, then re-insert the fixed
    // bump+gap footprint. Every feasible layout is reachable and nothing
    // is ever rejected.
    const std::size_t slack = cfg.duration_samples - (2 * n - 1) * len;
    std::vector<std::size_t> offsets(n);
    for (auto& o : offsets) o = static_cast<std::size_t>(rng.below(slack + 1));
    std::sort(offsets.begin(), offsets.end());
    std::vector<std::size_t> starts(n);
    for (std::size_t i = 0; i < n; ++i) starts[i] = offsets[i] + 2 * i * len;
    return starts;
}

namespace {

std::vector<SampleRecord> render(const SynthConfig& cfg, const std::vector<std::size_t>& starts, Rng& noise) {
    const std::size_t len = cfg.bump_len_samples;
    // Sampled half-sine, rescaled so the largest sample equals 1 exactly.
    std::vector<double> pulse(len), slope(len);
    double peak = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        const double phase = std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(len);
        pulse[i] = std::sin(phase);
        slope[i] = std::cos(phase);
        peak = std::max(peak, pulse[i]);
    }
    for (auto& v : pulse) v /= peak;

    std::vector<SampleRecord> out(cfg.duration_samples);
    for (std::size_t t = 0; t < out.size(); ++t) {
        auto& r = out[t];
        r.timestamp = static_cast<double>(t) / cfg.sample_rate;
        r.position = cfg.position;
        r.side = cfg.side;
        r.trace_id = cfg.trace_id;
        r[Feature::acc_z] = kGravity;
        r[Feature::speed] = cfg.base_speed;
    }
    for (auto s : starts)
        for (std::size_t i = 0; i < len; ++i) {
            auto& r = out[s + i];
            r.label = Label::bump;
            r[Feature::acc_z] += cfg.bump_amplitude * pulse[i];
            r[Feature::gyro_y] += cfg.gyro_amplitude * slope[i];
            r[Feature::speed] *= 1.0 - 0.2 * pulse[i];
        }
    if (cfg.noise_std > 0.0) {
        for (auto& r : out) {
            for (auto& v : r.values) v += cfg.noise_std * noise.normal();
            r[Feature::speed] = std::max(0.0, r[Feature::speed]);
        }
    }
    return out;
}

}  // namespace

std::vector<SampleRecord> generate_trace(const SynthConfig& cfg) {
    Rng layout(derive_seed(cfg.seed, 0));
    Rng noise(derive_seed(cfg.seed, 1));
    return render(cfg, place_bumps(cfg, layout), noise);
}

std::vector<SampleRecord> generate_traces(const SynthConfig& base, std::size_t n_traces,
                                          const std::vector<Position>& positions) {
    if (n_traces == 0) throw ArgumentError("synth: need at least one trace");
    if (positions.empty()) throw ArgumentError("synth: need at least one position");
    std::vector<SampleRecord> all;
    for (std::size_t k = 0; k < n_traces; ++k) {
        SynthConfig cfg = base;
        cfg.seed = derive_seed(base.seed, k);
        cfg.trace_id = base.trace_id + std::to_string(k + 1);
        Rng layout(derive_seed(cfg.seed, 0));
        const auto starts = place_bumps(cfg, layout);
        for (std::size_t p = 0; p < positions.size(); ++p) {
            SynthConfig pc = cfg;
            pc.position = positions[p];
            pc.bump_amplitude = cfg.bump_amplitude * position_gain(positions[p]);
            pc.gyro_amplitude = cfg.gyro_amplitude * position_gain(positions[p]);
            Rng noise(derive_seed(cfg.seed, 1 + p));
            auto recs = render(pc, starts, noise);
            all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
        }
    }
    return all;
}

}  // namespace etlnet
