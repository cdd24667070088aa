#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace etlnet {

// splitmix64 finalizer; also used to expand seeds and derive child streams.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// child_seed = hash(parent_seed, index). Independent of how far the parent
// stream has advanced.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept;

// xoshiro256** seeded by four successive splitmix64 outputs of the seed.
// Draw-for-draw identical on every platform; golden vectors live in
// tests/data/rng_seed0.txt.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;

    // 53-bit mantissa uniform in [0, 1).
    double uniform() noexcept;
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; the paired value is cached.
    double normal() noexcept;

    // Uniform integer in [0, n). Requires n > 0.
    std::uint64_t below(std::uint64_t n);

    Rng child(std::uint64_t index) const noexcept { return Rng(derive_seed(seed_, index)); }

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

template <class It>
void shuffle(It first, It last, Rng& rng) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        auto j = rng.below(i);
        using std::swap;
        swap(first[i - 1], first[j]);
    }
}

}  // namespace etlnet
