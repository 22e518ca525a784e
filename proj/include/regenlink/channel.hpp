#pragma once

#include <cmath>
#include <stdexcept>

#include "regenlink/errors.hpp"
#include "regenlink/frontend.hpp"
#include "regenlink/signal.hpp"
#include "regenlink/units.hpp"

namespace regenlink {

// One-way link description. eirp_dbm is the radiated power of the transmit
// side (transmit power plus its antenna), rx_gain_dbi the receive antenna.
struct LinkGeometry {
    double distance_m = 1.0;
    double carrier_hz = 26.3e9;
    double eirp_dbm = 20.0;
    double rx_gain_dbi = 0.0;
};

struct NoiseModel {
    double temperature_k = 290.0;
    double noise_figure_db = 0.0;
    double bandwidth_hz = 1.0e6;
};

// Free-space received power. Far field assumed; no range check beyond d > 0.
inline double friis_received_power_dbm(const LinkGeometry& g) {
    if (!(g.distance_m > 0.0))
        throw std::domain_error("friis_received_power: distance must be > 0");
    if (!(g.carrier_hz > 0.0))
        throw std::domain_error("friis_received_power: carrier must be > 0");
    const double lambda = kSpeedOfLight / g.carrier_hz;
    return g.eirp_dbm + g.rx_gain_dbi -
           20.0 * std::log10(4.0 * M_PI * g.distance_m / lambda);
}

inline double thermal_noise_psd_dbm_hz(const NoiseModel& n) {
    if (!(n.temperature_k > 0.0))
        throw std::domain_error("thermal_noise_psd: temperature must be > 0");
    return 10.0 * std::log10(kBoltzmann * n.temperature_k * 1000.0) + n.noise_figure_db;
}

inline double noise_power_dbm(const NoiseModel& n) {
    if (!(n.bandwidth_hz > 0.0))
        throw std::domain_error("noise_power: bandwidth must be > 0");
    return thermal_noise_psd_dbm_hz(n) + 10.0 * std::log10(n.bandwidth_hz);
}

// ---------------------------------------------------------------------------
// Carrier-offset penalties
// ---------------------------------------------------------------------------

enum class OffsetPenaltyKind {
    DownlinkResonance, // detuning of the tag's tuned receive chain
    UplinkCoherence,   // tag re-emission losing coherence with the reader carrier
};

struct OffsetPenaltyModel {
    OffsetPenaltyKind kind = OffsetPenaltyKind::DownlinkResonance;
    double sigma_hz = 1.3474334e7; // coherence-loss scale, uplink only
};

// Positive dB penalty, 0 at zero offset, monotone increasing.
// Downlink: the receive chain cascades the amplifier resonance with the
// detector's power-linear slope, so the Lorentzian detuning loss lands twice
// in the baseband dB budget. Uplink: resonance detuning plus a Gaussian-in-dB
// coherence loss with scale sigma_hz.
inline double offset_penalty_db(const OffsetPenaltyModel& m, const AmplifierBehavioral& amp,
                                double delta_f_hz) {
    if (delta_f_hz < 0.0)
        throw std::domain_error("offset_penalty: delta_f must be >= 0");
    const double detune_db = -amp_selectivity_db(amp, amp.f0_hz + delta_f_hz);
    switch (m.kind) {
    case OffsetPenaltyKind::DownlinkResonance:
        return 2.0 * detune_db;
    case OffsetPenaltyKind::UplinkCoherence: {
        if (!(m.sigma_hz > 0.0))
            throw ConfigError("offset_penalty.sigma_hz: must be > 0 for uplink");
        const double r = delta_f_hz / m.sigma_hz;
        return detune_db + 10.0 * std::log10(std::exp(1.0)) * r * r;
    }
    }
    throw std::logic_error("offset_penalty: unknown kind");
}

// ---------------------------------------------------------------------------
// Composed paths
// ---------------------------------------------------------------------------

struct PathOutput {
    BasebandSignal signal;
    double p_rx_dbm = 0.0;
};

// Reader -> tag leg of the ASK downlink. The waveform is rescaled so its peak
// (the OOK on level) carries p_rx; noise enters downstream at the detector
// baseband, not here.
inline PathOutput downlink_path(const BasebandSignal& tx, const LinkGeometry& g,
                                const AmplifierBehavioral& amp, double delta_f_hz) {
    if (tx.samples.empty())
        throw std::domain_error("downlink_path: empty signal");
    const OffsetPenaltyModel pen{OffsetPenaltyKind::DownlinkResonance, 0.0};
    const double p_rx = friis_received_power_dbm(g) - offset_penalty_db(pen, amp, delta_f_hz);
    double peak = 0.0;
    for (double s : tx.samples)
        peak = std::max(peak, std::abs(s));
    if (peak == 0.0)
        return PathOutput{tx, p_rx};
    const double scale = std::sqrt(dbm_to_watts(p_rx)) / peak;
    return PathOutput{scaled(tx, scale), p_rx};
}

// Carrier -> tag -> reader round trip of the FSK uplink. The tag amplifier
// boosts the received carrier (clamping at p_sat_out in saturated mode), the
// modulated waveform rides back over the return leg, and reader AWGN is added
// across the simulated Nyquist band.
//
// g_down: reader carrier to tag (eirp = carrier EIRP, rx = tag antenna).
// g_up:   tag to reader (eirp field ignored; the tag output power is used).
inline PathOutput uplink_roundtrip(const LinkGeometry& g_down, const AmplifierBehavioral& amp,
                                   const BasebandSignal& mod_sig, const LinkGeometry& g_up,
                                   const NoiseModel& reader_noise, double sigma_hz,
                                   double delta_f_hz, RandomSource& rng,
                                   bool saturated_retransmit = true, bool noise_enabled = true) {
    if (mod_sig.samples.empty())
        throw std::domain_error("uplink_roundtrip: empty signal");
    const double p_tag_in = friis_received_power_dbm(g_down);
    const AmpOutput tag_out =
        amp_apply(amp, mod_sig, p_tag_in, amp.f0_hz, saturated_retransmit);

    LinkGeometry ret = g_up;
    ret.eirp_dbm = tag_out.p_out_dbm;
    const OffsetPenaltyModel pen{OffsetPenaltyKind::UplinkCoherence, sigma_hz};
    const double p_rx =
        friis_received_power_dbm(ret) - offset_penalty_db(pen, amp, delta_f_hz);

    // normalize the modulated waveform to the received power
    const double w_now = signal_power_watts(tag_out.signal);
    BasebandSignal at_reader =
        (w_now > 0.0) ? scaled(tag_out.signal, std::sqrt(dbm_to_watts(p_rx) / w_now))
                      : tag_out.signal;

    if (noise_enabled) {
        // per-sample variance representing the thermal floor across the
        // simulated band: N0 * fs / 2
        const double n0_w = dbm_to_watts(thermal_noise_psd_dbm_hz(reader_noise));
        const double var = n0_w * at_reader.sample_rate_hz / 2.0;
        at_reader = add_awgn(at_reader, var, rng);
    }
    return PathOutput{std::move(at_reader), p_rx};
}

} // namespace regenlink
