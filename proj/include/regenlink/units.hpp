#pragma once

#include <cmath>
#include <stdexcept>

namespace regenlink {

inline constexpr double kSpeedOfLight = 299'792'458.0; // m/s
inline constexpr double kBoltzmann    = 1.380649e-23;  // J/K

// Power referenced to 1 mW. All link-budget arithmetic happens in dBm and
// converts to watts only where a waveform or a noise variance needs it.
struct PowerLevel {
    double dbm = 0.0;
};

struct Frequency {
    double hz = 0.0;
};

inline double dbm_to_watts(double dbm) {
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

inline double watts_to_dbm(double watts) {
    if (!(watts > 0.0))
        throw std::domain_error("watts_to_dbm: power must be > 0 W");
    return 10.0 * std::log10(watts) + 30.0;
}

inline double dbm_to_watts(PowerLevel p) { return dbm_to_watts(p.dbm); }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double ratio) {
    if (!(ratio > 0.0))
        throw std::domain_error("linear_to_db: ratio must be > 0");
    return 10.0 * std::log10(ratio);
}

} // namespace regenlink
