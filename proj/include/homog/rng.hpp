#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace homog {

// Deterministic, splittable random stream.  All randomness in the library
// flows through this wrapper so that identical (seed, stream) pairs yield
// byte-identical runs on every platform: mt19937_64 output is standardized,
// and the uniform/normal transforms below avoid the implementation-defined
// std::*_distribution classes.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : eng_(mix(seed, stream)) {}

    double uniform() {  // in [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Box-Muller; one sample per call, cached partner discarded for
    // reproducibility independent of call parity.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t next_u64() { return eng_(); }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        // splitmix64 finalizer over the (seed, stream) pair
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 eng_;
};

} // namespace homog
