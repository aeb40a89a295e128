#pragma once

#include <cmath>
#include <cstdint>

namespace tfbsde {

/// Counter-based substream generator. Every (seed, path, step) triple owns an
/// independent stream, so paths and blocks can be simulated in any order and
/// still reproduce the single-threaded result bit for bit.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::uint64_t path, std::uint64_t step) {
        key_ = mix(mix(seed + kGolden) ^ mix(path + 2 * kGolden));
        key_ = mix(key_ ^ mix(step + 3 * kGolden));
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

    /// Uniform in the open interval (0, 1).
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double next_normal() {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    long next_poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean > 64.0) {
            // Large-intensity fallback; step intensities in this library are
            // far below this in practice.
            const double n = next_normal();
            const double v = mean + std::sqrt(mean) * n;
            return v > 0.0 ? static_cast<long>(v + 0.5) : 0;
        }
        const double limit = std::exp(-mean);
        long k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_uniform();
        } while (p > limit && k < 100000);
        return k - 1;
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace tfbsde
