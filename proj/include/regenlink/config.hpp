#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "regenlink/calibrate.hpp"
#include "regenlink/errors.hpp"
#include "regenlink/link_eval.hpp"

namespace regenlink {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
    std::uint64_t seed = 0;
    ModelBundle models;
    std::optional<SweepSpec> sweep; // models/seed filled in by the loader
    std::optional<ParamSpace> space;
    std::optional<AnchorSet> anchors;
    FitOptions fit_options;
};

// ---------------------------------------------------------------------------
// JSON helpers: every rejection names the offending field's path
// ---------------------------------------------------------------------------

namespace cfgdetail {

using nlohmann::json;

inline const json& member(const json& j, const std::string& path, const std::string& key) {
    auto it = j.find(key);
    if (it == j.end())
        throw ConfigError(path + "." + key + ": missing");
    return *it;
}

inline double num(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_number())
        throw ConfigError(path + "." + key + ": must be a number");
    return v.get<double>();
}

inline double num_or(const json& j, const std::string& path, const std::string& key,
                     double fallback) {
    if (!j.contains(key))
        return fallback;
    return num(j, path, key);
}

inline bool flag_or(const json& j, const std::string& path, const std::string& key,
                    bool fallback) {
    if (!j.contains(key))
        return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean())
        throw ConfigError(path + "." + key + ": must be a boolean");
    return v.get<bool>();
}

inline std::vector<double> num_list(const json& j, const std::string& path,
                                    const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_array() || v.empty())
        throw ConfigError(path + "." + key + ": must be a nonempty array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number())
            throw ConfigError(path + "." + key + ": entries must be numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline void expect_positive(double v, const std::string& path) {
    if (!(v > 0.0))
        throw ConfigError(path + ": must be > 0");
}

inline RectifierModel parse_rectifier(const json& j, const std::string& path) {
    RectifierModel r;
    r.sensitivity_dbm = num(j, path, "sensitivity_dbm");
    r.v_scale_v = num(j, path, "v_scale_v");
    r.exponent_low = num_or(j, path, "exponent_low", 1.0);
    r.p_linear_dbm = num(j, path, "p_linear_dbm");
    r.baseband_noise_v = num(j, path, "baseband_noise_v");
    r.noise_bandwidth_hz = num(j, path, "noise_bandwidth_hz");
    expect_positive(r.v_scale_v, path + ".v_scale_v");
    expect_positive(r.exponent_low, path + ".exponent_low");
    expect_positive(r.noise_bandwidth_hz, path + ".noise_bandwidth_hz");
    if (r.baseband_noise_v < 0.0)
        throw ConfigError(path + ".baseband_noise_v: must be >= 0");
    return r;
}

inline json rectifier_to_json(const RectifierModel& r) {
    return json{{"sensitivity_dbm", r.sensitivity_dbm},
                {"v_scale_v", r.v_scale_v},
                {"exponent_low", r.exponent_low},
                {"p_linear_dbm", r.p_linear_dbm},
                {"baseband_noise_v", r.baseband_noise_v},
                {"noise_bandwidth_hz", r.noise_bandwidth_hz}};
}

inline ModelBundle parse_models(const json& j) {
    ModelBundle b = default_model_bundle();
    const std::string path = "models";

    const json& amp = member(j, path, "amplifier");
    b.amplifier.f0_hz = num(amp, path + ".amplifier", "f0_hz");
    b.amplifier.q = num(amp, path + ".amplifier", "q");
    b.amplifier.g_small_db = num(amp, path + ".amplifier", "g_small_db");
    b.amplifier.g_sat_db = num(amp, path + ".amplifier", "g_sat_db");
    b.amplifier.p_knee_low_dbm = num(amp, path + ".amplifier", "p_knee_low_dbm");
    b.amplifier.p_knee_high_dbm = num(amp, path + ".amplifier", "p_knee_high_dbm");
    b.amplifier.p_sat_out_dbm = num(amp, path + ".amplifier", "p_sat_out_dbm");
    expect_positive(b.amplifier.f0_hz, path + ".amplifier.f0_hz");
    expect_positive(b.amplifier.q, path + ".amplifier.q");
    if (b.amplifier.g_small_db < b.amplifier.g_sat_db)
        throw ConfigError(path + ".amplifier.g_small_db: must be >= g_sat_db");
    if (!(b.amplifier.p_knee_low_dbm < b.amplifier.p_knee_high_dbm))
        throw ConfigError(path + ".amplifier.p_knee_low_dbm: must be < p_knee_high_dbm");

    b.rectifier = parse_rectifier(member(j, path, "rectifier"), path + ".rectifier");
    if (j.contains("passive_rectifier"))
        b.passive_rectifier =
            parse_rectifier(j.at("passive_rectifier"), path + ".passive_rectifier");

    const json& down = member(j, path, "downlink");
    b.downlink_carrier_hz = num(down, path + ".downlink", "carrier_hz");
    b.downlink_eirp_dbm = num(down, path + ".downlink", "eirp_dbm");
    b.downlink_tag_rx_gain_dbi = num(down, path + ".downlink", "tag_rx_gain_dbi");
    expect_positive(b.downlink_carrier_hz, path + ".downlink.carrier_hz");

    const json& up = member(j, path, "uplink");
    b.uplink_carrier_hz = num(up, path + ".uplink", "carrier_hz");
    b.uplink_carrier_eirp_dbm = num(up, path + ".uplink", "carrier_eirp_dbm");
    b.uplink_tag_rx_gain_dbi = num(up, path + ".uplink", "tag_rx_gain_dbi");
    b.uplink_reader_rx_gain_dbi = num(up, path + ".uplink", "reader_rx_gain_dbi");
    b.uplink_sigma_hz = num(up, path + ".uplink", "sigma_hz");
    expect_positive(b.uplink_carrier_hz, path + ".uplink.carrier_hz");
    expect_positive(b.uplink_sigma_hz, path + ".uplink.sigma_hz");

    const json& noise = member(j, path, "reader_noise");
    b.reader_noise.temperature_k = num(noise, path + ".reader_noise", "temperature_k");
    b.reader_noise.noise_figure_db = num(noise, path + ".reader_noise", "noise_figure_db");
    b.reader_noise.bandwidth_hz = num(noise, path + ".reader_noise", "bandwidth_hz");
    expect_positive(b.reader_noise.temperature_k, path + ".reader_noise.temperature_k");
    expect_positive(b.reader_noise.bandwidth_hz, path + ".reader_noise.bandwidth_hz");

    b.saturated_retransmit = flag_or(j, path, "saturated_retransmit", true);
    b.noise_enabled = flag_or(j, path, "noise_enabled", true);
    return b;
}

inline json models_to_json(const ModelBundle& b) {
    return json{
        {"amplifier",
         {{"f0_hz", b.amplifier.f0_hz},
          {"q", b.amplifier.q},
          {"g_small_db", b.amplifier.g_small_db},
          {"g_sat_db", b.amplifier.g_sat_db},
          {"p_knee_low_dbm", b.amplifier.p_knee_low_dbm},
          {"p_knee_high_dbm", b.amplifier.p_knee_high_dbm},
          {"p_sat_out_dbm", b.amplifier.p_sat_out_dbm}}},
        {"rectifier", rectifier_to_json(b.rectifier)},
        {"passive_rectifier", rectifier_to_json(b.passive_rectifier)},
        {"downlink",
         {{"carrier_hz", b.downlink_carrier_hz},
          {"eirp_dbm", b.downlink_eirp_dbm},
          {"tag_rx_gain_dbi", b.downlink_tag_rx_gain_dbi}}},
        {"uplink",
         {{"carrier_hz", b.uplink_carrier_hz},
          {"carrier_eirp_dbm", b.uplink_carrier_eirp_dbm},
          {"tag_rx_gain_dbi", b.uplink_tag_rx_gain_dbi},
          {"reader_rx_gain_dbi", b.uplink_reader_rx_gain_dbi},
          {"sigma_hz", b.uplink_sigma_hz}}},
        {"reader_noise",
         {{"temperature_k", b.reader_noise.temperature_k},
          {"noise_figure_db", b.reader_noise.noise_figure_db},
          {"bandwidth_hz", b.reader_noise.bandwidth_hz}}},
        {"saturated_retransmit", b.saturated_retransmit},
        {"noise_enabled", b.noise_enabled}};
}

inline void parse_modem(const json& j, ModemDefaults& m) {
    const std::string path = "modem";
    m.ask_sample_rate_hz = num_or(j, path, "ask_sample_rate_hz", m.ask_sample_rate_hz);
    m.ask_preamble_bits = static_cast<std::size_t>(
        num_or(j, path, "ask_preamble_bits", static_cast<double>(m.ask_preamble_bits)));
    m.ask_threshold_fraction =
        num_or(j, path, "ask_threshold_fraction", m.ask_threshold_fraction);
    m.ask_lpf_cutoff_factor =
        num_or(j, path, "ask_lpf_cutoff_factor", m.ask_lpf_cutoff_factor);
    m.fsk_samples_per_symbol = static_cast<long>(
        num_or(j, path, "fsk_samples_per_symbol", static_cast<double>(m.fsk_samples_per_symbol)));
    m.fsk_tone0_bin =
        static_cast<long>(num_or(j, path, "fsk_tone0_bin", static_cast<double>(m.fsk_tone0_bin)));
    m.fsk_tone1_bin =
        static_cast<long>(num_or(j, path, "fsk_tone1_bin", static_cast<double>(m.fsk_tone1_bin)));
    expect_positive(m.ask_sample_rate_hz, path + ".ask_sample_rate_hz");
    if (m.ask_preamble_bits == 0)
        throw ConfigError(path + ".ask_preamble_bits: must be >= 1");
    if (!(m.ask_threshold_fraction > 0.0 && m.ask_threshold_fraction < 1.0))
        throw ConfigError(path + ".ask_threshold_fraction: must be in (0, 1)");
    expect_positive(m.ask_lpf_cutoff_factor, path + ".ask_lpf_cutoff_factor");
    if (m.fsk_samples_per_symbol < 4)
        throw ConfigError(path + ".fsk_samples_per_symbol: must be >= 4");
    if (m.fsk_tone0_bin < 1 || m.fsk_tone1_bin < 1 ||
        m.fsk_tone0_bin == m.fsk_tone1_bin ||
        2 * m.fsk_tone0_bin >= m.fsk_samples_per_symbol ||
        2 * m.fsk_tone1_bin >= m.fsk_samples_per_symbol)
        throw ConfigError(path + ".fsk_tone_bins: must be distinct, >= 1 and below Nyquist");
}

inline SweepSpec parse_sweep(const json& j) {
    SweepSpec s;
    const std::string path = "sweep";
    const json& link = member(j, path, "link");
    if (!link.is_string() || (link.get<std::string>() != "down" && link.get<std::string>() != "up"))
        throw ConfigError(path + ".link: must be \"down\" or \"up\"");
    s.link = (link.get<std::string>() == "down") ? Link::Downlink : Link::Uplink;
    s.distances_m = num_list(j, path, "distances_m");
    s.bit_rates_bps = num_list(j, path, "bit_rates_bps");
    s.offsets_hz = num_list(j, path, "offsets_hz");
    s.bits_per_point = static_cast<long>(num_or(j, path, "bits_per_point", 100000.0));
    for (double d : s.distances_m)
        expect_positive(d, path + ".distances_m");
    for (double r : s.bit_rates_bps)
        expect_positive(r, path + ".bit_rates_bps");
    for (double o : s.offsets_hz)
        if (o < 0.0)
            throw ConfigError(path + ".offsets_hz: must be >= 0");
    if (s.bits_per_point < 1000)
        throw ConfigError(path + ".bits_per_point: must be >= 1000");
    return s;
}

inline Anchor::Direction parse_direction(const json& j, const std::string& path) {
    if (!j.contains("direction"))
        return Anchor::Direction::Equal;
    const std::string d = j.at("direction").get<std::string>();
    if (d == "eq")
        return Anchor::Direction::Equal;
    if (d == "le")
        return Anchor::Direction::AtMost;
    if (d == "ge")
        return Anchor::Direction::AtLeast;
    throw ConfigError(path + ".direction: must be one of eq/le/ge");
}

inline void parse_calibration(const json& j, RunConfig& cfg) {
    const std::string path = "calibration";
    const json& space_j = member(j, path, "space");
    if (!space_j.is_array() || space_j.empty())
        throw ConfigError(path + ".space: must be a nonempty array");
    ParamSpace space;
    for (const auto& e : space_j) {
        space.names.push_back(member(e, path + ".space", "name").get<std::string>());
        space.lower.push_back(num(e, path + ".space", "lower"));
        space.upper.push_back(num(e, path + ".space", "upper"));
        space.log_scale.push_back(flag_or(e, path + ".space", "log_scale", false));
    }
    validate_space(space);

    const json& anchors_j = member(j, path, "anchors");
    if (!anchors_j.is_array() || anchors_j.empty())
        throw ConfigError(path + ".anchors: must be a nonempty array");
    AnchorSet anchors;
    for (const auto& e : anchors_j) {
        Anchor a;
        a.observable = member(e, path + ".anchors", "observable").get<std::string>();
        a.target = num(e, path + ".anchors", "target");
        a.tolerance = num(e, path + ".anchors", "tolerance");
        a.weight = num_or(e, path + ".anchors", "weight", 1.0);
        a.direction = parse_direction(e, path + ".anchors");
        if (e.contains("citation"))
            a.citation = e.at("citation").get<std::string>();
        anchors.push_back(std::move(a));
    }
    validate_anchors(anchors);

    if (j.contains("pso")) {
        const json& p = j.at("pso");
        cfg.fit_options.pso.n_particles =
            static_cast<int>(num_or(p, path + ".pso", "n_particles", 40.0));
        cfg.fit_options.pso.n_iters =
            static_cast<long>(num_or(p, path + ".pso", "n_iters", 200.0));
        cfg.fit_options.pso.inertia = num_or(p, path + ".pso", "inertia", 0.729);
        cfg.fit_options.pso.cognitive = num_or(p, path + ".pso", "cognitive", 1.49445);
        cfg.fit_options.pso.social = num_or(p, path + ".pso", "social", 1.49445);
    }
    if (j.contains("nelder_mead")) {
        const json& p = j.at("nelder_mead");
        cfg.fit_options.nelder_mead.max_iter =
            static_cast<long>(num_or(p, path + ".nelder_mead", "max_iter", 500.0));
        cfg.fit_options.nelder_mead.x_tol = num_or(p, path + ".nelder_mead", "x_tol", 1e-10);
        cfg.fit_options.nelder_mead.f_tol = num_or(p, path + ".nelder_mead", "f_tol", 1e-12);
    }
    cfg.space = std::move(space);
    cfg.anchors = std::move(anchors);
}

} // namespace cfgdetail

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

inline RunConfig load_run_config(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in)
        throw ConfigError("config: cannot open " + config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: invalid JSON in " + config_path + ": " + e.what());
    }

    RunConfig cfg;
    const int version = static_cast<int>(cfgdetail::num(j, "config", "schema_version"));
    if (version != kConfigSchemaVersion)
        throw ConfigError("config.schema_version: unsupported version " +
                          std::to_string(version));
    cfg.seed = static_cast<std::uint64_t>(cfgdetail::num_or(j, "config", "seed", 0.0));

    cfg.models = cfgdetail::parse_models(cfgdetail::member(j, "config", "models"));
    if (j.contains("modem"))
        cfgdetail::parse_modem(j.at("modem"), cfg.models.modem);

    if (j.contains("sweep")) {
        SweepSpec s = cfgdetail::parse_sweep(j.at("sweep"));
        s.seed = cfg.seed;
        s.models = cfg.models;
        cfg.sweep = std::move(s);
    }
    if (j.contains("calibration"))
        cfgdetail::parse_calibration(j.at("calibration"), cfg);
    return cfg;
}

// Calibrated model file: parameters plus a provenance block recording what
// the fit was asked to hit and how close it got.
inline void write_model_file(const std::string& path, const ModelBundle& bundle,
                             const FitResult& fit, const AnchorSet& anchors,
                             std::uint64_t seed) {
    nlohmann::json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["models"] = cfgdetail::models_to_json(bundle);
    nlohmann::json anchors_j = nlohmann::json::array();
    const auto& obs = bundle_observable_registry();
    for (const Anchor& a : anchors) {
        const double value = obs.at(a.observable)(bundle);
        anchors_j.push_back({{"observable", a.observable},
                             {"target", a.target},
                             {"tolerance", a.tolerance},
                             {"weight", a.weight},
                             {"direction", a.direction == Anchor::Direction::Equal ? "eq"
                                           : a.direction == Anchor::Direction::AtMost ? "le"
                                                                                      : "ge"},
                             {"citation", a.citation},
                             {"fitted_value", value},
                             {"residual", anchor_residual(a, value)}});
    }
    j["provenance"] = {{"seed", seed},
                       {"loss", fit.loss},
                       {"n_evaluations", fit.n_evaluations},
                       {"converged", fit.converged},
                       {"anchors", anchors_j}};
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("model file: cannot write " + path);
    out << j.dump(2) << "\n";
}

inline ModelBundle load_model_file(const std::string& path, const ModemDefaults& modem) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("model file: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model file: invalid JSON in " + path + ": " + e.what());
    }
    const int version = static_cast<int>(cfgdetail::num(j, "model", "schema_version"));
    if (version != kConfigSchemaVersion)
        throw ConfigError("model.schema_version: unsupported version " +
                          std::to_string(version));
    ModelBundle b = cfgdetail::parse_models(cfgdetail::member(j, "model", "models"));
    b.modem = modem;
    return b;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline constexpr const char* kSweepCsvHeader =
    "link,distance_m,bit_rate_bps,offset_hz,p_rx_dbm,eb_n0_db,n_bits,n_errors,ber,"
    "sync_failed";

// Fixed column order, fixed "%.6e" float formatting, LF line endings. Output
// bytes depend only on the rows.
inline std::string sweep_rows_to_csv(const std::vector<SweepRow>& rows) {
    std::string out(kSweepCsvHeader);
    out += "\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.6e", v);
        out += buf;
    };
    for (const SweepRow& r : rows) {
        out += (r.link == Link::Downlink) ? "down," : "up,";
        fmt(r.distance_m);
        out += ",";
        fmt(r.bit_rate_bps);
        out += ",";
        fmt(r.offset_hz);
        out += ",";
        fmt(r.metrics.p_rx_dbm);
        out += ",";
        fmt(r.metrics.eb_n0_db);
        out += ",";
        std::snprintf(buf, sizeof buf, "%ld,%ld,", r.metrics.n_bits, r.metrics.n_errors);
        out += buf;
        fmt(r.metrics.ber);
        out += ",";
        out += r.metrics.sync_failed ? "1" : "0";
        out += "\n";
    }
    return out;
}

} // namespace regenlink
