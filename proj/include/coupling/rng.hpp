#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace coupling {

/// Seedable, bit-reproducible 64-bit generator.
///
/// The engine is std::mt19937_64 and the seeding goes through std::seed_seq,
/// both of which the standard specifies exactly, so a (seed, stream) pair
/// yields the same sequence on every conforming platform. The standard
/// distributions are NOT portable; every draw here is derived from raw
/// engine output by the helpers below.
///
/// Stream splitting: the generator for (seed, stream) is seeded with the four
/// 32-bit words {lo(seed), hi(seed), lo(stream), hi(stream)}. Simulations use
/// one stream per path coordinate (stream 0 drives x, stream 1 drives y) and
/// one seed per path.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n) by rejection, free of modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: empty range");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    /// Index drawn with probability proportional to weights (inverse CDF).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        const double u = uniform() * total;
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last_positive = i;
            if (u < acc) return i;
        }
        return last_positive;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace coupling
