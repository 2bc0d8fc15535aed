#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace survrf {

/// SplitMix64 step; used to derive well-separated stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic seed for a numbered substream of a master seed. Streams
/// derived from distinct salt tuples are independent for all practical
/// purposes.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt_a,
                                 std::uint64_t salt_b = 0, std::uint64_t salt_c = 0) {
    std::uint64_t s = master;
    splitmix64(s);
    s ^= 0xd1b54a32d192ed03ull * (salt_a + 1);
    splitmix64(s);
    s ^= 0x8cb92ba72f3d8dd7ull * (salt_b + 1);
    splitmix64(s);
    s ^= 0xaef17502108ef2d9ull * (salt_c + 1);
    return splitmix64(s);
}

/// mt19937_64 wrapper with fully specified draw algorithms. The std
/// distribution classes are implementation-defined, which would break
/// bit-reproducibility across toolchains, so the few draws we need are
/// spelled out here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    std::uint32_t next_u32() { return static_cast<std::uint32_t>(engine_() >> 32); }

    /// Uniform integer in [0, n) by rejection on the top of the range.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as input to log().
    double uniform01_open0() { return 1.0 - uniform01(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli_half() { return (engine_() >> 63) != 0; }

    /// Standard normal via the polar method (deterministic rejection order).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    double exponential(double rate) { return -std::log(uniform01_open0()) / rate; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace survrf
