#pragma once

#include <cstdint>

namespace muonlab {

/// Seeded 64-bit pseudorandom stream (SplitMix64 core).
///
/// The draw sequence is a pure function of the seed and is identical on every
/// platform. Standard normals come from the Marsaglia polar method; the second
/// variate of each accepted pair is cached and returned by the next call.
///
/// A stream is single-owner: never share one instance between threads. Use
/// `derive_seed` / `substream` to hand independent streams to parallel tasks.
class RandomStream {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    explicit RandomStream(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    double normal();

    std::uint64_t seed() const { return seed_; }
    /// Number of 64-bit words consumed so far.
    std::uint64_t counter() const { return counter_; }

    /// seed XOR (index * golden gamma).
    static std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
        return base_seed ^ (index * kGolden);
    }
    RandomStream substream(std::uint64_t index) const {
        return RandomStream(derive_seed(seed_, index));
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace muonlab
