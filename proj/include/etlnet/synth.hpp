#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etlnet/dataio.hpp"

namespace etlnet {

struct SynthConfig {
    std::size_t duration_samples = 6000;
    std::size_t bump_count = 10;
    std::size_t bump_len_samples = 60;
    double bump_amplitude = 3.0;  // acc_z half-sine peak, m/s^2
    double gyro_amplitude = 0.3;  // gyro_y peak, rad/s
    double noise_std = 0.3;
    double base_speed = 8.0;  // m/s
    std::uint64_t seed = 0;
    double sample_rate = 100.0;  // Hz
    std::string trace_id = "synth";
    Position position = Position::dashboard;
    Side side = Side::right;

    void validate() const;  // throws ArgumentError
};

inline constexpr double kGravity = 9.81;

// Start indices of the bumps, sorted. Consecutive bumps are separated by at
// least bump_len samples of flat road.
std::vector<std::size_t> place_bumps(const SynthConfig& cfg, Rng& rng);

std::vector<SampleRecord> generate_trace(const SynthConfig& cfg);

// Several traces ("<trace_id>1", "<trace_id>2", ...) each recorded at every
// requested position. Positions share the bump layout of their trace but draw
// independent noise; the response is strongest below the suspension.
std::vector<SampleRecord> generate_traces(const SynthConfig& base, std::size_t n_traces,
                                          const std::vector<Position>& positions = {Position::dashboard});

// Relative bump response per mounting position.
double position_gain(Position p);

}  // namespace etlnet
