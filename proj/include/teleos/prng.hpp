#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace teleos {

// Counter-based 64-bit generator. The whole stream is defined by one seed;
// draw i is a pure function of (seed, i), so any implementation that follows
// the recipe below reproduces the stream bit for bit.
//
//   state_i = seed + (i + 1) * 0x9e3779b97f4a7c15   (wrapping)
//   z = state_i
//   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   out_i = z ^ (z >> 31)
//
// This is the splitmix64 finalizer applied to an affine counter.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    static uint64_t at(uint64_t seed, uint64_t index) {
        uint64_t z = seed + (index + 1) * 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t next_u64() { return at(seed_, counter_++); }

    // Uniform in [0, 1): top 53 bits scaled by 2^-53.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller. Each draw consumes exactly two uniforms:
    //   u1 = ((a >> 11) + 1) * 2^-53   in (0, 1]
    //   u2 =  (b >> 11)      * 2^-53   in [0, 1)
    //   z  = sqrt(-2 ln u1) * cos(2 pi u2)
    // The sine branch is discarded so draw i depends only on counter
    // positions 2i and 2i+1 of the uniform stream.
    double next_gaussian() {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    uint64_t counter() const { return counter_; }
    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    uint64_t counter_ = 0;
};

// Derives an independent stream seed from a parent seed and a context tag.
// Used to give every (scenario, operator, purpose) tuple its own stream.
inline uint64_t derive_seed(uint64_t parent, uint64_t tag) {
    return CounterRng::at(parent ^ 0x6a09e667f3bcc908ull, tag);
}

}  // namespace teleos
