#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "regenlink/errors.hpp"
#include "regenlink/signal.hpp"

namespace regenlink {

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

struct AskConfig {
    double bit_rate_bps = 0.0;
    double sample_rate_hz = 0.0;
    BitStream preamble;                // alternating 1010... by default
    double threshold_fraction = 0.5;   // slicer level within the preamble's min..max span
    double lpf_cutoff_hz = 0.0;
};

inline BitStream alternating_preamble(std::size_t n_bits = 16) {
    BitStream p(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i)
        p[i] = static_cast<std::uint8_t>((i % 2 == 0) ? 1 : 0);
    return p;
}

inline void validate_ask(const AskConfig& cfg, bool need_preamble) {
    if (!(cfg.bit_rate_bps > 0.0))
        throw ConfigError("ask.bit_rate_bps: must be > 0");
    if (!(cfg.sample_rate_hz >= 8.0 * cfg.bit_rate_bps))
        throw ConfigError("ask.sample_rate_hz: must be >= 8 x bit_rate");
    if (!(cfg.threshold_fraction > 0.0 && cfg.threshold_fraction < 1.0))
        throw ConfigError("ask.threshold_fraction: must be in (0, 1)");
    if (need_preamble && cfg.preamble.empty())
        throw ConfigError("ask.preamble: must be nonempty");
}

struct FskConfig {
    double tone0_hz = 0.0;
    double tone1_hz = 0.0;
    double bit_rate_bps = 0.0;
    double sample_rate_hz = 0.0;

    long samples_per_symbol() const {
        return std::lround(sample_rate_hz / bit_rate_bps);
    }
};

inline void validate_fsk(const FskConfig& cfg) {
    if (!(cfg.bit_rate_bps > 0.0))
        throw ConfigError("fsk.bit_rate_bps: must be > 0");
    if (!(cfg.sample_rate_hz > 0.0))
        throw ConfigError("fsk.sample_rate_hz: must be > 0");
    const double spb = cfg.sample_rate_hz / cfg.bit_rate_bps;
    if (std::abs(spb - std::round(spb)) > 1e-9 || spb < 2.0)
        throw ConfigError("fsk.sample_rate_hz: must be an integer number of samples per symbol");
    if (!(cfg.tone0_hz > 0.0) || !(cfg.tone1_hz > 0.0))
        throw ConfigError("fsk.tones: must be > 0");
    if (cfg.tone0_hz == cfg.tone1_hz)
        throw ConfigError("fsk.tones: tone0 and tone1 must differ");
    if (cfg.tone0_hz >= cfg.sample_rate_hz / 2.0 || cfg.tone1_hz >= cfg.sample_rate_hz / 2.0)
        throw ConfigError("fsk.tones: tones must sit below sample_rate / 2");
}

struct DecodeResult {
    BitStream bits;
    long sync_offset_samples = 0;
    std::vector<double> per_bit_metric; // decision statistic per decoded bit
};

// ---------------------------------------------------------------------------
// ASK (on-off keying) modulator
// ---------------------------------------------------------------------------

// Emits preamble then payload as OOK: bit 1 -> amplitude 1.0 held for one
// symbol period, bit 0 -> amplitude 0.0.
inline BasebandSignal ask_modulate(const BitStream& payload, const AskConfig& cfg) {
    if (payload.empty())
        throw std::domain_error("ask_modulate: empty payload");
    validate_ask(cfg, /*need_preamble=*/false);

    const double spb = cfg.sample_rate_hz / cfg.bit_rate_bps;
    const std::size_t n_bits = cfg.preamble.size() + payload.size();
    const std::size_t n_samples = static_cast<std::size_t>(std::llround(n_bits * spb));

    BasebandSignal out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.resize(n_samples, 0.0);
    for (std::size_t k = 0; k < n_bits; ++k) {
        const std::uint8_t bit = (k < cfg.preamble.size()) ? cfg.preamble[k]
                                                           : payload[k - cfg.preamble.size()];
        if (!bit)
            continue;
        const std::size_t lo = static_cast<std::size_t>(std::llround(k * spb));
        const std::size_t hi = static_cast<std::size_t>(std::llround((k + 1) * spb));
        for (std::size_t i = lo; i < hi && i < n_samples; ++i)
            out.samples[i] = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Single-pole low-pass smoother
// ---------------------------------------------------------------------------

// y[n] = a*x[n] + (1-a)*y[n-1] with a chosen for a -3 dB point at cutoff.
// Unit DC gain by construction.
inline BasebandSignal lowpass(const BasebandSignal& sig, double cutoff_hz) {
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < sig.sample_rate_hz / 2.0))
        throw ConfigError("lowpass.cutoff: must be in (0, sample_rate/2)");
    const double a = 1.0 - std::exp(-2.0 * M_PI * cutoff_hz / sig.sample_rate_hz);
    BasebandSignal out;
    out.sample_rate_hz = sig.sample_rate_hz;
    out.samples.resize(sig.samples.size());
    double y = 0.0;
    for (std::size_t i = 0; i < sig.samples.size(); ++i) {
        y += a * (sig.samples[i] - y);
        out.samples[i] = y;
    }
    return out;
}

// ---------------------------------------------------------------------------
// ASK demodulator
// ---------------------------------------------------------------------------

namespace detail {

// The preamble as the receiver expects to see it after its own low-pass
// stage, mapped to +-1 so the correlation ignores DC.
inline std::vector<double> filtered_preamble_template(const AskConfig& cfg) {
    const double spb = cfg.sample_rate_hz / cfg.bit_rate_bps;
    const std::size_t n = static_cast<std::size_t>(std::llround(cfg.preamble.size() * spb));
    BasebandSignal tmpl;
    tmpl.sample_rate_hz = cfg.sample_rate_hz;
    tmpl.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = std::min<std::size_t>(
            static_cast<std::size_t>(i / spb), cfg.preamble.size() - 1);
        tmpl.samples[i] = cfg.preamble[k] ? 1.0 : -1.0;
    }
    return lowpass(tmpl, cfg.lpf_cutoff_hz).samples;
}

} // namespace detail

// Fixed pipeline: low-pass filter; coarse sync at the first crossing of the
// mid-amplitude level; fine sync by cross-correlating the known (filtered)
// preamble over one symbol period of candidate offsets; threshold from the
// preamble span; slice at each clock pulse center. Returns payload bits only.
inline DecodeResult ask_demodulate(const BasebandSignal& envelope, const AskConfig& cfg) {
    validate_ask(cfg, /*need_preamble=*/true);
    const double spb = cfg.sample_rate_hz / cfg.bit_rate_bps;
    const long spb_i = std::lround(spb);
    const std::size_t n = envelope.samples.size();
    if (static_cast<double>(n) < (cfg.preamble.size() + 1) * spb)
        throw std::length_error("ask_demodulate: envelope shorter than preamble + 1 symbols");

    const BasebandSignal filt = lowpass(envelope, cfg.lpf_cutoff_hz);
    const std::vector<double>& f = filt.samples;

    // coarse: first crossing of the mid level
    const auto [mn_it, mx_it] = std::minmax_element(f.begin(), f.end());
    const double mid = 0.5 * (*mn_it + *mx_it);
    if (*mx_it == *mn_it)
        throw SyncError("ask_demodulate: flat envelope, no level crossing");
    std::size_t crossing = n;
    for (std::size_t i = 1; i < n; ++i) {
        if ((f[i - 1] < mid) != (f[i] < mid)) {
            crossing = i;
            break;
        }
    }
    if (crossing == n)
        throw SyncError("ask_demodulate: no level crossing found");

    // fine: best template alignment within one symbol around the crossing
    const std::vector<double> tmpl = detail::filtered_preamble_template(cfg);
    const long t_lo =
        std::max<long>(0, static_cast<long>(crossing) - spb_i + 1);
    long best_t0 = -1;
    double best_corr = -std::numeric_limits<double>::infinity();
    for (long t0 = t_lo; t0 < t_lo + spb_i; ++t0) {
        if (t0 + static_cast<long>(tmpl.size()) > static_cast<long>(n))
            break;
        double corr = 0.0;
        for (std::size_t i = 0; i < tmpl.size(); ++i)
            corr += tmpl[i] * f[t0 + i];
        if (corr > best_corr) {
            best_corr = corr;
            best_t0 = t0;
        }
    }
    if (best_t0 < 0)
        throw SyncError("ask_demodulate: no feasible sync offset");

    // threshold from the filtered preamble region
    const std::size_t pre_len = static_cast<std::size_t>(std::llround(cfg.preamble.size() * spb));
    const std::size_t pre_end = std::min<std::size_t>(best_t0 + pre_len, n);
    double pmn = f[best_t0], pmx = f[best_t0];
    for (std::size_t i = best_t0; i < pre_end; ++i) {
        pmn = std::min(pmn, f[i]);
        pmx = std::max(pmx, f[i]);
    }
    const double threshold = pmn + cfg.threshold_fraction * (pmx - pmn);

    // slice payload symbols at their clock pulse centers
    DecodeResult res;
    res.sync_offset_samples = best_t0 % spb_i;
    const long n_symbols = static_cast<long>(
        std::floor((static_cast<double>(n) - best_t0) / spb));
    const long n_payload = n_symbols - static_cast<long>(cfg.preamble.size());
    if (n_payload < 1)
        throw SyncError("ask_demodulate: no payload symbols after sync");
    res.bits.reserve(n_payload);
    res.per_bit_metric.reserve(n_payload);
    for (long k = 0; k < n_payload; ++k) {
        const std::size_t idx = best_t0 + static_cast<std::size_t>(std::llround(
            (cfg.preamble.size() + k + 0.5) * spb));
        const double v = f[std::min(idx, n - 1)];
        res.bits.push_back(v > threshold ? 1 : 0);
        res.per_bit_metric.push_back(v - threshold);
    }
    return res;
}

// ---------------------------------------------------------------------------
// FSK modulator
// ---------------------------------------------------------------------------

// Unit-amplitude sinusoid switching between the two tones, phase-continuous
// across symbol boundaries.
inline BasebandSignal fsk_modulate(const BitStream& payload, const FskConfig& cfg) {
    if (payload.empty())
        throw std::domain_error("fsk_modulate: empty payload");
    validate_fsk(cfg);
    const long spb = cfg.samples_per_symbol();
    BasebandSignal out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.resize(payload.size() * static_cast<std::size_t>(spb));
    double phase = 0.0;
    std::size_t i = 0;
    const double two_pi = 2.0 * M_PI;
    for (std::uint8_t bit : payload) {
        const double step = two_pi * (bit ? cfg.tone1_hz : cfg.tone0_hz) / cfg.sample_rate_hz;
        for (long j = 0; j < spb; ++j, ++i) {
            out.samples[i] = std::sin(phase);
            phase += step;
            if (phase > two_pi)
                phase -= two_pi;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Goertzel single-bin DFT
// ---------------------------------------------------------------------------

// |X_k| of the length-n DFT over the given samples, k = round(n*f/fs),
// via the second-order recurrence s0 = x + coeff*s1 - s2.
//
// The state runs in extended precision: near coeff = +-2 the recurrence
// grows resonantly and the closing magnitude cancels almost all of it, which
// in plain double costs ~n^2 ulps at the DC and Nyquist bins.
inline double goertzel_span(std::span<const double> x, double sample_rate_hz,
                            double target_hz, std::size_t n) {
    if (n > x.size())
        throw std::length_error("goertzel: window longer than signal");
    if (n == 0)
        throw std::domain_error("goertzel: empty window");
    if (target_hz < 0.0 || target_hz >= sample_rate_hz / 2.0)
        throw std::domain_error("goertzel: target must be in [0, sample_rate/2)");
    const long bin = std::lround(static_cast<double>(n) * target_hz / sample_rate_hz);
    static const long double pi_l = std::acos(-1.0L);
    const long double omega =
        2.0L * pi_l * static_cast<long double>(bin) / static_cast<long double>(n);
    const long double coeff = 2.0L * std::cos(omega);
    long double s1 = 0.0L, s2 = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double s0 = x[i] + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const long double mag2 = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    return static_cast<double>(std::sqrt(std::max(0.0L, mag2)));
}

inline double goertzel(const BasebandSignal& sig, double target_hz, std::size_t n) {
    return goertzel_span(std::span<const double>(sig.samples), sig.sample_rate_hz,
                         target_hz, n);
}

// ---------------------------------------------------------------------------
// FSK demodulator with brute-force timing search
// ---------------------------------------------------------------------------

// No preamble on this link, so every candidate sampling offset inside one
// symbol is tried; the offset whose per-symbol tone-magnitude margins sum
// highest wins. Ties on magnitude decode as 0; ties on score keep the
// smallest offset.
inline DecodeResult fsk_demodulate(const BasebandSignal& sig, const FskConfig& cfg,
                                   long offset_stride = 1) {
    validate_fsk(cfg);
    if (offset_stride < 1)
        throw ConfigError("fsk.offset_stride: must be >= 1");
    const long spb = cfg.samples_per_symbol();
    const long n = static_cast<long>(sig.samples.size());
    if (n < 2 * spb)
        throw std::length_error("fsk_demodulate: need at least 2 symbol periods");

    DecodeResult best;
    double best_score = -std::numeric_limits<double>::infinity();
    long best_offset = 0;

    std::vector<std::uint8_t> bits;
    std::vector<double> metrics;
    for (long o = 0; o < spb; o += offset_stride) {
        const long n_sym = (n - o) / spb;
        if (n_sym < 1)
            break;
        bits.clear();
        metrics.clear();
        double score = 0.0;
        for (long m = 0; m < n_sym; ++m) {
            std::span<const double> window(sig.samples.data() + o + m * spb,
                                           static_cast<std::size_t>(spb));
            const double g0 = goertzel_span(window, cfg.sample_rate_hz, cfg.tone0_hz,
                                            static_cast<std::size_t>(spb));
            const double g1 = goertzel_span(window, cfg.sample_rate_hz, cfg.tone1_hz,
                                            static_cast<std::size_t>(spb));
            bits.push_back(g1 > g0 ? 1 : 0);
            metrics.push_back(g1 - g0);
            score += std::abs(g1 - g0);
        }
        if (score > best_score) {
            best_score = score;
            best_offset = o;
            best.bits = bits;
            best.per_bit_metric = metrics;
        }
    }
    best.sync_offset_samples = best_offset;
    return best;
}

} // namespace regenlink
