#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "regenlink/errors.hpp"
#include "regenlink/signal.hpp"
#include "regenlink/units.hpp"

namespace regenlink {

// ---------------------------------------------------------------------------
// Positive-feedback loop math
// ---------------------------------------------------------------------------

struct LoopModel {
    double open_loop_gain = 1.0;  // linear ratio, > 0
    double feedback_factor = 0.0; // linear ratio, >= 0
    double loop_phase_deg = 0.0;
};

inline constexpr double kUnityLoopGainEps = 1e-9;

// G / (1 - f*G). Throws once the loop gain sits within eps of unity, where
// the amplifier stops amplifying and starts oscillating.
inline double closed_loop_gain(const LoopModel& m, double eps = kUnityLoopGainEps) {
    const double loop = m.feedback_factor * m.open_loop_gain;
    const double denom = 1.0 - loop;
    if (std::abs(denom) <= eps)
        throw OscillationError("closed_loop_gain: loop gain at unity");
    return m.open_loop_gain / denom;
}

struct BarkhausenVerdict {
    bool oscillating = false;
    double gain_margin_db = 0.0;   // distance of |f*G| below unity, in dB
    double phase_margin_deg = 0.0; // angular distance to the nearest multiple of 360
};

// Oscillation requires unity loop-gain magnitude together with a net loop
// phase of 0 mod 360 degrees (within phase_tol_deg).
inline BarkhausenVerdict barkhausen_check(const LoopModel& m, double phase_tol_deg = 1.0) {
    const double loop = std::abs(m.feedback_factor * m.open_loop_gain);
    double ph = std::fmod(m.loop_phase_deg, 360.0);
    if (ph < 0.0)
        ph += 360.0;
    const double phase_dist = std::min(ph, 360.0 - ph);

    BarkhausenVerdict v;
    v.phase_margin_deg = phase_dist;
    if (loop >= 1.0 && phase_dist <= phase_tol_deg) {
        v.oscillating = true;
        v.gain_margin_db = 0.0;
        return v;
    }
    v.gain_margin_db = (loop > 0.0) ? -20.0 * std::log10(loop)
                                    : std::numeric_limits<double>::infinity();
    return v;
}

// ---------------------------------------------------------------------------
// Resonator math
// ---------------------------------------------------------------------------

struct ResonatorParams {
    double inductance_h = 0.0;
    double capacitance_f = 0.0;
    double reactance_ohm = 0.0;           // total reactance X
    double resistance_ohm = 0.0;          // ohmic loss R
    double negative_resistance_ohm = 0.0; // |R_r| contributed by feedback
};

// Q = X / (R - |R_r|). Feedback cancels ohmic loss; when it cancels all of
// it the resonator has no net damping left.
inline double quality_factor(const ResonatorParams& r) {
    const double denom = r.resistance_ohm - r.negative_resistance_ohm;
    if (denom <= 0.0)
        throw OscillationError("quality_factor: losses fully canceled");
    return r.reactance_ohm / denom;
}

inline Frequency resonant_frequency(double inductance_h, double capacitance_f) {
    if (!(inductance_h > 0.0) || !(capacitance_f > 0.0))
        throw std::domain_error("resonant_frequency: L and C must be > 0");
    return Frequency{1.0 / (2.0 * M_PI * std::sqrt(inductance_h * capacitance_f))};
}

struct InterdigCapParams {
    double eps_r = 1.0;        // relative permittivity
    double finger_length_m = 0.0;
    int n_fingers = 3;
    double a1_f_per_m = 0.0;   // empirical, substrate height / finger width
    double a2_f_per_m = 0.0;
};

// C = (eps_r + 1) * l * (N - 3) * (A1 + A2). Vanishes at N = 3.
inline double interdig_capacitance(const InterdigCapParams& p) {
    if (p.n_fingers < 3)
        throw std::domain_error("interdig_capacitance: need at least 3 fingers");
    return (p.eps_r + 1.0) * p.finger_length_m * static_cast<double>(p.n_fingers - 3) *
           (p.a1_f_per_m + p.a2_f_per_m);
}

inline double parallel_plate_capacitance(double area_m2, double eps_f_per_m, double d_m) {
    if (!(area_m2 > 0.0) || !(eps_f_per_m > 0.0) || !(d_m > 0.0))
        throw std::domain_error("parallel_plate_capacitance: area, eps, d must be > 0");
    return area_m2 * eps_f_per_m / d_m;
}

// ---------------------------------------------------------------------------
// Behavioral amplifier model
// ---------------------------------------------------------------------------

// Gain compression plus single-pole resonator selectivity. The compression
// curve interpolates linearly in dB between the two knee anchors and clamps
// outside them. p_sat_out_dbm is the constant output level the device holds
// in saturated-retransmitter mode.
struct AmplifierBehavioral {
    double f0_hz = 25.98e9;
    double q = 210.0;
    double g_small_db = 30.0;
    double g_sat_db = 15.0;
    double p_knee_low_dbm = -40.0;
    double p_knee_high_dbm = -10.0;
    double p_sat_out_dbm = -46.2449;
};

inline double amp_compression_db(const AmplifierBehavioral& a, double p_in_dbm) {
    if (p_in_dbm <= a.p_knee_low_dbm)
        return a.g_small_db;
    if (p_in_dbm >= a.p_knee_high_dbm)
        return a.g_sat_db;
    const double t = (p_in_dbm - a.p_knee_low_dbm) / (a.p_knee_high_dbm - a.p_knee_low_dbm);
    return a.g_small_db + t * (a.g_sat_db - a.g_small_db);
}

// 0 dB at resonance, -3 dB at f0 +- f0/(2Q).
inline double amp_selectivity_db(const AmplifierBehavioral& a, double f_hz) {
    const double x = 2.0 * a.q * (f_hz - a.f0_hz) / a.f0_hz;
    return -10.0 * std::log10(1.0 + x * x);
}

inline double amp_gain_db(const AmplifierBehavioral& a, double p_in_dbm, double f_hz) {
    return amp_compression_db(a, p_in_dbm) + amp_selectivity_db(a, f_hz);
}

struct AmpOutput {
    BasebandSignal signal;
    double p_out_dbm = 0.0;
};

// Memoryless: the waveform shape is preserved, only its level moves.
// With saturated_retransmit on, any input whose boosted level reaches
// p_sat_out leaves at exactly p_sat_out, independent of p_in.
inline AmpOutput amp_apply(const AmplifierBehavioral& a, const BasebandSignal& sig,
                           double p_in_dbm, double f_hz, bool saturated_retransmit) {
    if (sig.samples.empty())
        throw std::domain_error("amp_apply: empty signal");
    const double boosted = p_in_dbm + amp_gain_db(a, p_in_dbm, f_hz);
    const double p_out = (saturated_retransmit && boosted >= a.p_sat_out_dbm)
                             ? a.p_sat_out_dbm
                             : boosted;
    const double scale = std::pow(10.0, (p_out - p_in_dbm) / 20.0);
    return AmpOutput{scaled(sig, scale), p_out};
}

// ---------------------------------------------------------------------------
// Behavioral envelope-detector model
// ---------------------------------------------------------------------------

// Piecewise power-law transfer: v = v_scale * (w/w_lin)^exponent_low below
// p_linear, v = v_scale * (w/w_lin) above. Additive Gaussian baseband noise
// of RMS baseband_noise_v per sample. sensitivity_dbm is the input level at
// which the noiseless output equals that noise floor; noise_bandwidth_hz is
// the bandwidth the per-sample floor refers to.
struct RectifierModel {
    double sensitivity_dbm = -60.0;
    double v_scale_v = 0.1;
    double exponent_low = 1.0;
    double p_linear_dbm = -10.0;
    double baseband_noise_v = 1e-6;
    double noise_bandwidth_hz = 972254.0;
};

inline double rectifier_transfer_v(const RectifierModel& r, double w_watts) {
    if (w_watts <= 0.0)
        return 0.0;
    const double w_lin = dbm_to_watts(r.p_linear_dbm);
    const double ratio = w_watts / w_lin;
    return (ratio < 1.0) ? r.v_scale_v * std::pow(ratio, r.exponent_low)
                         : r.v_scale_v * ratio;
}

// Input power at which the noiseless output voltage equals the noise floor.
inline double rectifier_derived_sensitivity_dbm(const RectifierModel& r) {
    const double w_lin = dbm_to_watts(r.p_linear_dbm);
    const double ratio_v = r.baseband_noise_v / r.v_scale_v;
    const double w = (ratio_v >= 1.0) ? w_lin * ratio_v
                                      : w_lin * std::pow(ratio_v, 1.0 / r.exponent_low);
    return watts_to_dbm(w);
}

inline BasebandSignal rectifier_envelope_watts(const RectifierModel& r,
                                               const std::vector<double>& w_trace,
                                               double sample_rate_hz, RandomSource& rng) {
    if (w_trace.empty())
        throw std::domain_error("rectifier_envelope: empty trace");
    BasebandSignal out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.resize(w_trace.size());
    const double sigma = r.baseband_noise_v;
    if (sigma > 0.0) {
        for (std::size_t i = 0; i < w_trace.size(); ++i)
            out.samples[i] = rectifier_transfer_v(r, w_trace[i]) + sigma * rng.next_gaussian();
    } else {
        for (std::size_t i = 0; i < w_trace.size(); ++i)
            out.samples[i] = rectifier_transfer_v(r, w_trace[i]);
    }
    return out;
}

// dBm-trace entry point; -inf dBm samples map to zero input power.
inline BasebandSignal rectifier_envelope(const RectifierModel& r,
                                         const std::vector<double>& p_in_trace_dbm,
                                         double sample_rate_hz, RandomSource& rng) {
    if (p_in_trace_dbm.empty())
        throw std::domain_error("rectifier_envelope: empty trace");
    std::vector<double> w(p_in_trace_dbm.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = std::isinf(p_in_trace_dbm[i]) && p_in_trace_dbm[i] < 0.0
                   ? 0.0
                   : dbm_to_watts(p_in_trace_dbm[i]);
    return rectifier_envelope_watts(r, w, sample_rate_hz, rng);
}

} // namespace regenlink
