#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "regenlink/channel.hpp"
#include "regenlink/errors.hpp"
#include "regenlink/frontend.hpp"
#include "regenlink/modem.hpp"
#include "regenlink/signal.hpp"

namespace regenlink {

// ---------------------------------------------------------------------------
// Experiment outcome
// ---------------------------------------------------------------------------

struct LinkMetrics {
    double eb_n0_db = 0.0;
    double ber = 0.0;
    long n_bits = 0;
    long n_errors = 0;
    double p_rx_dbm = 0.0;
    bool sync_failed = false;
};

inline std::pair<long, double> measure_ber(const BitStream& tx, const BitStream& rx) {
    if (tx.size() != rx.size())
        throw std::length_error("measure_ber: stream lengths differ");
    if (tx.empty())
        throw std::length_error("measure_ber: empty streams");
    long errors = 0;
    for (std::size_t i = 0; i < tx.size(); ++i)
        errors += (tx[i] != rx[i]) ? 1 : 0;
    return {errors, static_cast<double>(errors) / static_cast<double>(tx.size())};
}

inline double eb_n0_db(double p_rx_dbm, double noise_psd_dbm_hz, double bit_rate_bps) {
    if (!(bit_rate_bps > 0.0))
        throw std::domain_error("eb_n0_db: bit rate must be > 0");
    return p_rx_dbm - noise_psd_dbm_hz - 10.0 * std::log10(bit_rate_bps);
}

// ---------------------------------------------------------------------------
// Model bundle
// ---------------------------------------------------------------------------

// Per-rate modem settings derived at each grid point. ASK keeps a fixed
// sample rate across rates so the detector noise floor stays comparable;
// FSK scales its sample rate with the symbol and pins both tones to DFT bins.
struct ModemDefaults {
    double ask_sample_rate_hz = 960e3;
    std::size_t ask_preamble_bits = 16;
    double ask_threshold_fraction = 0.5;
    double ask_lpf_cutoff_factor = 1.0; // cutoff = factor * bit rate
    long fsk_samples_per_symbol = 16;
    long fsk_tone0_bin = 3;
    long fsk_tone1_bin = 4;
};

struct ModelBundle {
    AmplifierBehavioral amplifier;
    RectifierModel rectifier;         // regenerative receiver on the downlink
    RectifierModel passive_rectifier; // bare-diode reference part

    double downlink_carrier_hz = 26.3e9;
    double downlink_eirp_dbm = 20.0;
    double downlink_tag_rx_gain_dbi = 20.0; // standard-horn receive side

    double uplink_carrier_hz = 25.98e9;
    double uplink_carrier_eirp_dbm = 20.0;
    double uplink_tag_rx_gain_dbi = 5.0;    // broadband patch
    double uplink_reader_rx_gain_dbi = 20.0;
    double uplink_sigma_hz = 1.3474334e7;

    NoiseModel reader_noise{290.0, 10.0, 2.4e6};

    ModemDefaults modem;
    bool saturated_retransmit = true;
    bool noise_enabled = true;
};

inline ModelBundle default_model_bundle() {
    ModelBundle b;
    b.passive_rectifier.sensitivity_dbm = -3.0;
    b.passive_rectifier.p_linear_dbm = 0.0;
    b.passive_rectifier.v_scale_v = 0.1;
    b.passive_rectifier.baseband_noise_v = 0.0501187233627272; // floor at -3 dBm
    return b;
}

inline AskConfig make_ask_config(const ModelBundle& b, double bit_rate_bps) {
    AskConfig cfg;
    cfg.bit_rate_bps = bit_rate_bps;
    cfg.sample_rate_hz = b.modem.ask_sample_rate_hz;
    cfg.preamble = alternating_preamble(b.modem.ask_preamble_bits);
    cfg.threshold_fraction = b.modem.ask_threshold_fraction;
    cfg.lpf_cutoff_hz = b.modem.ask_lpf_cutoff_factor * bit_rate_bps;
    return cfg;
}

inline FskConfig make_fsk_config(const ModelBundle& b, double bit_rate_bps) {
    FskConfig cfg;
    cfg.bit_rate_bps = bit_rate_bps;
    cfg.sample_rate_hz = bit_rate_bps * static_cast<double>(b.modem.fsk_samples_per_symbol);
    cfg.tone0_hz = static_cast<double>(b.modem.fsk_tone0_bin) * bit_rate_bps;
    cfg.tone1_hz = static_cast<double>(b.modem.fsk_tone1_bin) * bit_rate_bps;
    return cfg;
}

inline LinkGeometry downlink_geometry(const ModelBundle& b, double distance_m) {
    return LinkGeometry{distance_m, b.downlink_carrier_hz, b.downlink_eirp_dbm,
                        b.downlink_tag_rx_gain_dbi};
}

inline LinkGeometry uplink_forward_leg(const ModelBundle& b, double distance_m) {
    return LinkGeometry{distance_m, b.uplink_carrier_hz, b.uplink_carrier_eirp_dbm,
                        b.uplink_tag_rx_gain_dbi};
}

inline LinkGeometry uplink_return_leg(const ModelBundle& b, double distance_m) {
    return LinkGeometry{distance_m, b.uplink_carrier_hz, 0.0, b.uplink_reader_rx_gain_dbi};
}

// Input-referred noise floor of the detector: its sensitivity power spread
// over its equivalent noise bandwidth.
inline double rectifier_noise_psd_dbm_hz(const RectifierModel& r) {
    return r.sensitivity_dbm - 10.0 * std::log10(r.noise_bandwidth_hz);
}

// ---------------------------------------------------------------------------
// Analytic link quantities (no waveforms)
// ---------------------------------------------------------------------------

inline double analytic_downlink_p_rx_dbm(const ModelBundle& b, double distance_m,
                                         double delta_f_hz) {
    const OffsetPenaltyModel pen{OffsetPenaltyKind::DownlinkResonance, 0.0};
    return friis_received_power_dbm(downlink_geometry(b, distance_m)) -
           offset_penalty_db(pen, b.amplifier, delta_f_hz);
}

inline double analytic_downlink_ebn0_db(const ModelBundle& b, double distance_m,
                                        double bit_rate_bps, double delta_f_hz) {
    return eb_n0_db(analytic_downlink_p_rx_dbm(b, distance_m, delta_f_hz),
                    rectifier_noise_psd_dbm_hz(b.rectifier), bit_rate_bps);
}

inline double analytic_uplink_p_rx_dbm(const ModelBundle& b, double distance_m,
                                       double delta_f_hz, bool saturated) {
    const double p_tag = friis_received_power_dbm(uplink_forward_leg(b, distance_m));
    const double boosted = p_tag + amp_gain_db(b.amplifier, p_tag, b.amplifier.f0_hz);
    const double p_out = (saturated && boosted >= b.amplifier.p_sat_out_dbm)
                             ? b.amplifier.p_sat_out_dbm
                             : boosted;
    LinkGeometry ret = uplink_return_leg(b, distance_m);
    ret.eirp_dbm = p_out;
    const OffsetPenaltyModel pen{OffsetPenaltyKind::UplinkCoherence, b.uplink_sigma_hz};
    return friis_received_power_dbm(ret) - offset_penalty_db(pen, b.amplifier, delta_f_hz);
}

inline double analytic_uplink_ebn0_db(const ModelBundle& b, double distance_m,
                                      double bit_rate_bps, double delta_f_hz) {
    return eb_n0_db(analytic_uplink_p_rx_dbm(b, distance_m, delta_f_hz,
                                             b.saturated_retransmit),
                    thermal_noise_psd_dbm_hz(b.reader_noise), bit_rate_bps);
}

// Closed-form OOK error prediction behind the calibration loop. The slicer
// margin is the filtered on-level excursion past the midpoint threshold; the
// noise is the per-sample floor through the low-pass stage.
inline double predicted_downlink_ber(const ModelBundle& b, double distance_m,
                                     double bit_rate_bps, double delta_f_hz) {
    if (!b.noise_enabled)
        return 0.0;
    const double w_rx = dbm_to_watts(analytic_downlink_p_rx_dbm(b, distance_m, delta_f_hz));
    const double v_on = rectifier_transfer_v(b.rectifier, w_rx);
    const AskConfig cfg = make_ask_config(b, bit_rate_bps);
    const double fs = cfg.sample_rate_hz;
    const double fc = cfg.lpf_cutoff_hz;
    const double sigma_sample = b.rectifier.baseband_noise_v *
                                std::sqrt((fs / 2.0) / b.rectifier.noise_bandwidth_hz);
    const double a = 1.0 - std::exp(-2.0 * M_PI * fc / fs);
    const double sigma_post = sigma_sample * std::sqrt(a / (2.0 - a));
    const double margin =
        v_on * std::max(0.0, 0.5 - std::exp(-M_PI * fc / bit_rate_bps));
    if (sigma_post <= 0.0)
        return 0.0;
    const double q = 0.5 * std::erfc(margin / sigma_post / std::sqrt(2.0));
    return std::clamp(q, 1e-300, 0.5);
}

// Noncoherent orthogonal FSK with tone-magnitude comparison.
inline double predicted_uplink_ber(const ModelBundle& b, double distance_m,
                                   double bit_rate_bps, double delta_f_hz) {
    if (!b.noise_enabled)
        return 0.0;
    const double ebn0 = db_to_linear(analytic_uplink_ebn0_db(b, distance_m, bit_rate_bps,
                                                             delta_f_hz));
    return std::clamp(0.5 * std::exp(-ebn0 / 2.0), 1e-300, 0.5);
}

// ---------------------------------------------------------------------------
// Monte Carlo points
// ---------------------------------------------------------------------------

namespace detail {

// Long payloads run as independent segments so buffers stay bounded; each
// segment draws from its own derived stream.
inline constexpr long kSegmentBits = 20000;
inline constexpr std::uint64_t kSegmentStreamShift = 20;

inline RandomSource segment_rng(std::uint64_t seed, std::uint64_t point_stream, long segment) {
    return RandomSource(seed, (point_stream << kSegmentStreamShift) |
                                  static_cast<std::uint64_t>(segment));
}

// Compares a decode against the reference payload with decoded[i] lined up
// against payload[i + shift]; payload bits outside the decoded span count as
// errors.
inline long decode_errors(const BitStream& payload, const BitStream& decoded,
                          std::size_t shift = 0) {
    const std::size_t n = payload.size();
    long errors = 0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i + shift < n && i < decoded.size(); ++i) {
        errors += (payload[i + shift] != decoded[i]) ? 1 : 0;
        ++covered;
    }
    errors += static_cast<long>(n - covered);
    return errors;
}

} // namespace detail

// Random payload -> ASK modulate -> free-space path -> detector envelope ->
// ASK demodulate. Eb/N0 is analytic, from the received power and the
// detector's input-referred noise floor. A failed sync scores half errors
// and raises the flag instead of aborting the sweep.
inline LinkMetrics run_downlink_point(const ModelBundle& b, double distance_m,
                                      double bit_rate_bps, double delta_f_hz,
                                      std::uint64_t seed, std::uint64_t point_stream,
                                      long n_bits) {
    if (n_bits < 1)
        throw ConfigError("run_downlink_point: n_bits must be >= 1");
    const AskConfig cfg = make_ask_config(b, bit_rate_bps);
    validate_ask(cfg, /*need_preamble=*/true);
    const LinkGeometry geo = downlink_geometry(b, distance_m);

    // per-sample detector noise referred to the simulated bandwidth
    RectifierModel rect = b.rectifier;
    rect.baseband_noise_v =
        b.noise_enabled ? b.rectifier.baseband_noise_v *
                              std::sqrt((cfg.sample_rate_hz / 2.0) /
                                        b.rectifier.noise_bandwidth_hz)
                        : 0.0;

    LinkMetrics mx;
    mx.n_bits = n_bits;
    long done = 0, segment = 0;
    while (done < n_bits) {
        const long n_seg = std::min(detail::kSegmentBits, n_bits - done);
        RandomSource rng = detail::segment_rng(seed, point_stream, segment);
        const BitStream payload = random_bits(static_cast<std::size_t>(n_seg), rng);

        const BasebandSignal wave = ask_modulate(payload, cfg);
        const PathOutput rx = downlink_path(wave, geo, b.amplifier, delta_f_hz);
        mx.p_rx_dbm = rx.p_rx_dbm;

        std::vector<double> w_trace(rx.signal.samples.size());
        for (std::size_t i = 0; i < w_trace.size(); ++i)
            w_trace[i] = rx.signal.samples[i] * rx.signal.samples[i];
        const BasebandSignal env =
            rectifier_envelope_watts(rect, w_trace, cfg.sample_rate_hz, rng);

        try {
            const DecodeResult dec = ask_demodulate(env, cfg);
            mx.n_errors += detail::decode_errors(payload, dec.bits);
        } catch (const SyncError&) {
            mx.sync_failed = true;
            mx.n_errors += n_seg / 2;
        }
        done += n_seg;
        ++segment;
    }
    mx.ber = static_cast<double>(mx.n_errors) / static_cast<double>(mx.n_bits);
    mx.eb_n0_db = eb_n0_db(mx.p_rx_dbm, rectifier_noise_psd_dbm_hz(b.rectifier), bit_rate_bps);
    return mx;
}

// Random payload -> FSK modulate -> carrier/tag/reader round trip with reader
// AWGN -> Goertzel FSK demodulate. Eb/N0 is analytic, from the received power
// and the reader's thermal floor.
inline LinkMetrics run_uplink_point(const ModelBundle& b, double distance_m,
                                    double bit_rate_bps, double delta_f_hz,
                                    std::uint64_t seed, std::uint64_t point_stream,
                                    long n_bits) {
    if (n_bits < 1)
        throw ConfigError("run_uplink_point: n_bits must be >= 1");
    const FskConfig cfg = make_fsk_config(b, bit_rate_bps);
    validate_fsk(cfg);
    const LinkGeometry fwd = uplink_forward_leg(b, distance_m);
    const LinkGeometry ret = uplink_return_leg(b, distance_m);

    LinkMetrics mx;
    mx.n_bits = n_bits;
    long done = 0, segment = 0;
    while (done < n_bits) {
        const long n_seg = std::min(detail::kSegmentBits, n_bits - done);
        RandomSource rng = detail::segment_rng(seed, point_stream, segment);
        const BitStream payload = random_bits(static_cast<std::size_t>(n_seg), rng);

        const BasebandSignal wave = fsk_modulate(payload, cfg);
        const PathOutput rx = uplink_roundtrip(fwd, b.amplifier, wave, ret, b.reader_noise,
                                               b.uplink_sigma_hz, delta_f_hz, rng,
                                               b.saturated_retransmit, b.noise_enabled);
        mx.p_rx_dbm = rx.p_rx_dbm;
        const DecodeResult dec = fsk_demodulate(rx.signal, cfg);
        // With no boundary markers, a sync offset in the upper half symbol is
        // the same alignment as offset - 1 symbol: the decode rides one bit
        // late relative to the transmitted stream.
        const std::size_t slip =
            (2 * dec.sync_offset_samples > cfg.samples_per_symbol()) ? 1 : 0;
        mx.n_errors += detail::decode_errors(payload, dec.bits, slip);
        done += n_seg;
        ++segment;
    }
    mx.ber = static_cast<double>(mx.n_errors) / static_cast<double>(mx.n_bits);
    mx.eb_n0_db = eb_n0_db(mx.p_rx_dbm, thermal_noise_psd_dbm_hz(b.reader_noise),
                           bit_rate_bps);
    return mx;
}

// ---------------------------------------------------------------------------
// Sweep harness
// ---------------------------------------------------------------------------

enum class Link { Downlink, Uplink };

struct SweepSpec {
    Link link = Link::Downlink;
    std::vector<double> distances_m;
    std::vector<double> bit_rates_bps;
    std::vector<double> offsets_hz;
    long bits_per_point = 100000;
    std::uint64_t seed = 0;
    ModelBundle models;
};

struct SweepRow {
    Link link = Link::Downlink;
    double distance_m = 0.0;
    double bit_rate_bps = 0.0;
    double offset_hz = 0.0;
    LinkMetrics metrics;
};

inline void validate_sweep(const SweepSpec& spec) {
    if (spec.distances_m.empty())
        throw ConfigError("sweep.distances_m: must be nonempty");
    if (spec.bit_rates_bps.empty())
        throw ConfigError("sweep.bit_rates_bps: must be nonempty");
    if (spec.offsets_hz.empty())
        throw ConfigError("sweep.offsets_hz: must be nonempty");
    if (spec.bits_per_point < 1000)
        throw ConfigError("sweep.bits_per_point: must be >= 1000");
}

// Evaluates every (distance, rate, offset) triple in lexicographic grid
// order. Each point draws from RandomSource(seed, row index), so the table
// is identical under any worker count or schedule.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec, unsigned n_threads = 1) {
    validate_sweep(spec);
    const std::size_t n_d = spec.distances_m.size();
    const std::size_t n_r = spec.bit_rates_bps.size();
    const std::size_t n_o = spec.offsets_hz.size();
    const std::size_t total = n_d * n_r * n_o;

    std::vector<SweepRow> rows(total);
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = cursor.fetch_add(1);
            if (idx >= total || failed.load())
                return;
            const std::size_t di = idx / (n_r * n_o);
            const std::size_t ri = (idx / n_o) % n_r;
            const std::size_t oi = idx % n_o;
            SweepRow& row = rows[idx];
            row.link = spec.link;
            row.distance_m = spec.distances_m[di];
            row.bit_rate_bps = spec.bit_rates_bps[ri];
            row.offset_hz = spec.offsets_hz[oi];
            try {
                row.metrics =
                    (spec.link == Link::Downlink)
                        ? run_downlink_point(spec.models, row.distance_m, row.bit_rate_bps,
                                             row.offset_hz, spec.seed, idx,
                                             spec.bits_per_point)
                        : run_uplink_point(spec.models, row.distance_m, row.bit_rate_bps,
                                           row.offset_hz, spec.seed, idx,
                                           spec.bits_per_point);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) {
                    std::ostringstream os;
                    os << "sweep row " << idx << " (d=" << row.distance_m
                       << " m, rate=" << row.bit_rate_bps << " bps, offset="
                       << row.offset_hz << " Hz): " << e.what();
                    first_error = os.str();
                }
                return;
            }
        }
    };

    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (failed.load())
        throw ConfigError(first_error);
    return rows;
}

} // namespace regenlink
