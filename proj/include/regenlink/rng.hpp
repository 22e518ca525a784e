#pragma once

#include <cmath>
#include <cstdint>

namespace regenlink {

// Counter-based generator with an explicit (seed, stream_id) identity.
// Every draw is a pure function of (seed, stream_id, draw index), so a
// parallel sweep can hand one stream to each grid point and reproduce the
// exact sample sequence under any scheduling.
class RandomSource {
public:
    RandomSource(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id), key_(derive_key(seed, stream_id)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() {
        ++counter_;
        return mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    // Uniform draw strictly inside (0, 1).
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Marsaglia's polar method. Uses only sqrt/log so the
    // sequence is stable for a given libm; pairs are cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_unit() - 1.0;
            v = 2.0 * next_unit() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed ^ 0xA0761D6478BD642FULL) + stream * 0x9E3779B97F4A7C15ULL);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace regenlink
