#pragma once

#include <cstdint>
#include <random>

#include "lpm/types.hpp"

namespace lpm {

/// splitmix64 finalizer. Used for seed derivation, never as a stream.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for an independent substream (e.g. one series of a dataset).
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master ^ mix64(index));
}

/// Seeded generator with pinned output transforms.
///
/// mt19937_64 is bit-exact by the C++ standard; the uniform and normal
/// transforms are implemented here instead of <random> distributions, whose
/// output differs between standard libraries. Streams are therefore
/// byte-reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Box-Muller, cosine branch only; two uniforms consumed per draw.
    double normal(double mean = 0.0, double sigma = 1.0) {
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(kTwoPi * u2);
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace lpm
