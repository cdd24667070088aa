#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace etlnet::verify {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kRelFloor = 1e-6;
inline constexpr double kLayerTolerance = 1e-4;
inline constexpr double kModelTolerance = 1e-3;

struct CheckResult {
    std::string name;
    bool passed = false;
    double max_error = 0.0;  // largest relative error, or count of mismatches
    double tolerance = 0.0;
    std::size_t checked = 0;  // scalar comparisons made
    std::string detail;
};

// |a - n| / max(|a|, |n|, kRelFloor)
double relative_error(double analytic, double numeric);

// Central finite differences at extended precision for every layer kind,
// three or more random shapes each, every input and parameter entry.
std::vector<CheckResult> layer_gradient_checks(std::uint64_t seed);

// Miniature etlnet (filters 4, hidden 4, dense 4, window 16): BCE gradient
// of `samples` random trainable entries.
CheckResult model_gradient_check(std::uint64_t seed, std::size_t samples = 20);

// Perturbing x at t' must leave conv outputs at every t < t' bit-identical,
// for k in {1,2,3} and d in {1,2,4}.
std::vector<CheckResult> causality_checks(std::uint64_t seed);

// Randomized (label, probability) sets against a brute-force enumerator.
CheckResult metrics_oracle_check(std::uint64_t seed, std::size_t cases = 1000);

std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace etlnet::verify
