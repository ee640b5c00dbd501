#ifndef ISQ_RNG_HPP
#define ISQ_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace isq {

/// Random stream used by every stochastic routine. One stream per trial.
using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) with 53 random bits.
///
/// Written out by hand (instead of std::uniform_real_distribution) because
/// the standard distributions are implementation-defined; replays must be
/// bit-identical across standard libraries.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Unbiased integer in [0, bound) by rejection. bound must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
    std::uint64_t draw = rng();
    while (draw >= limit) {
        draw = rng();
    }
    return draw % bound;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the (policy, trial) cell of an experiment. FNV-1a over the name,
/// then mixed with the trial index and base seed.
inline std::uint64_t stream_seed(std::string_view policy_name, std::uint64_t trial_index,
                                 std::uint64_t base_seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : policy_name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h ^ splitmix64(trial_index ^ splitmix64(base_seed)));
}

}  // namespace isq

#endif  // ISQ_RNG_HPP
