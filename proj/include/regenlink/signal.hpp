#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "regenlink/rng.hpp"
#include "regenlink/units.hpp"

namespace regenlink {

// Uniformly sampled real amplitude trace (volts into a 1-ohm reference).
// Real-valued baseband is sufficient: every receiver in this system works on
// an envelope or a subcarrier tone, never on complex IQ.
struct BasebandSignal {
    std::vector<double> samples;
    double sample_rate_hz = 0.0;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

using BitStream = std::vector<std::uint8_t>;

inline BitStream random_bits(std::size_t n, RandomSource& rng) {
    BitStream bits(n);
    for (std::size_t i = 0; i < n; ++i)
        bits[i] = static_cast<std::uint8_t>((rng.next_u64() >> 43) & 1u);
    return bits;
}

// Mean squared amplitude into the 1-ohm reference load.
inline double signal_power_watts(const BasebandSignal& sig) {
    if (sig.samples.empty())
        throw std::domain_error("signal_power: empty signal");
    double acc = 0.0;
    for (double s : sig.samples)
        acc += s * s;
    return acc / static_cast<double>(sig.samples.size());
}

// -inf for an all-zero signal.
inline double signal_power_dbm(const BasebandSignal& sig) {
    const double w = signal_power_watts(sig);
    if (w <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return watts_to_dbm(w);
}

inline BasebandSignal scaled(const BasebandSignal& sig, double factor) {
    BasebandSignal out = sig;
    for (double& s : out.samples)
        s *= factor;
    return out;
}

// Adds zero-mean Gaussian samples of variance noise_power_watts.
// noise_power_watts == 0 returns the input untouched (and leaves rng alone).
inline BasebandSignal add_awgn(const BasebandSignal& sig, double noise_power_watts,
                               RandomSource& rng) {
    if (noise_power_watts < 0.0)
        throw std::domain_error("add_awgn: noise power must be >= 0");
    if (noise_power_watts == 0.0)
        return sig;
    const double sigma = std::sqrt(noise_power_watts);
    BasebandSignal out = sig;
    for (double& s : out.samples)
        s += sigma * rng.next_gaussian();
    return out;
}

} // namespace regenlink
