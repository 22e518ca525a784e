#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "regenlink/config.hpp"

using namespace regenlink;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
    const std::string path = "/tmp/regenlink_test_" + name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

const char* kMinimalModels = R"({
  "schema_version": 1,
  "seed": 4,
  "models": {
    "amplifier": {"f0_hz": 25.98e9, "q": 210.0, "g_small_db": 30.0, "g_sat_db": 15.0,
                  "p_knee_low_dbm": -40.0, "p_knee_high_dbm": -10.0, "p_sat_out_dbm": -46.2449},
    "rectifier": {"sensitivity_dbm": -60.0, "v_scale_v": 0.1, "exponent_low": 1.0,
                  "p_linear_dbm": -10.0, "baseband_noise_v": 1.0e-6, "noise_bandwidth_hz": 972254.0},
    "downlink": {"carrier_hz": 26.3e9, "eirp_dbm": 20.0, "tag_rx_gain_dbi": 20.0},
    "uplink": {"carrier_hz": 25.98e9, "carrier_eirp_dbm": 20.0, "tag_rx_gain_dbi": 5.0,
               "reader_rx_gain_dbi": 20.0, "sigma_hz": 1.3474334e7},
    "reader_noise": {"temperature_k": 290.0, "noise_figure_db": 10.0, "bandwidth_hz": 2.4e6}
  },
  "sweep": {"link": "up", "distances_m": [5.0, 10.0], "bit_rates_bps": [20.0e3],
            "offsets_hz": [0.0], "bits_per_point": 1000}
})";

} // namespace

TEST_CASE("load_run_config accepts a valid config") {
    const std::string path = write_temp("ok.json", kMinimalModels);
    const RunConfig cfg = load_run_config(path);
    CHECK(cfg.seed == 4);
    CHECK(cfg.models.amplifier.q == 210.0);
    REQUIRE(cfg.sweep.has_value());
    CHECK(cfg.sweep->link == Link::Uplink);
    CHECK(cfg.sweep->seed == 4);
    CHECK(cfg.sweep->distances_m.size() == 2);
    CHECK_FALSE(cfg.anchors.has_value());
    std::remove(path.c_str());
}

TEST_CASE("config rejection names the offending path") {
    SECTION("bad amplifier q") {
        std::string text = kMinimalModels;
        text.replace(text.find("\"q\": 210.0"), 10, "\"q\": -1.0");
        const std::string path = write_temp("badq.json", text);
        try {
            load_run_config(path);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("amplifier.q") != std::string::npos);
        }
        std::remove(path.c_str());
    }
    SECTION("missing field") {
        std::string text = kMinimalModels;
        text.replace(text.find("\"sigma_hz\""), 10, "\"sigma_xx\"");
        const std::string path = write_temp("missing.json", text);
        try {
            load_run_config(path);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("uplink.sigma_hz") != std::string::npos);
        }
        std::remove(path.c_str());
    }
    SECTION("unsupported schema version") {
        std::string text = kMinimalModels;
        text.replace(text.find("\"schema_version\": 1"), 19, "\"schema_version\": 9");
        const std::string path = write_temp("ver.json", text);
        CHECK_THROWS_AS(load_run_config(path), ConfigError);
        std::remove(path.c_str());
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_run_config("/tmp/regenlink_does_not_exist.json"), ConfigError);
    }
    SECTION("invalid JSON") {
        const std::string path = write_temp("broken.json", "{not json");
        CHECK_THROWS_AS(load_run_config(path), ConfigError);
        std::remove(path.c_str());
    }
}

TEST_CASE("model file roundtrip preserves parameters") {
    const ModelBundle b = default_model_bundle();
    const FitResult fit{{1.0}, 0.5, 123, true};
    const AnchorSet anchors{{"amp_q", 210.0, 1.0, 1.0, Anchor::Direction::Equal, "check"}};
    const std::string path = "/tmp/regenlink_test_model.json";
    write_model_file(path, b, fit, anchors, 77);

    const ModelBundle back = load_model_file(path, b.modem);
    CHECK(back.amplifier.p_sat_out_dbm == b.amplifier.p_sat_out_dbm);
    CHECK(back.rectifier.noise_bandwidth_hz == b.rectifier.noise_bandwidth_hz);
    CHECK(back.uplink_sigma_hz == b.uplink_sigma_hz);
    CHECK(back.passive_rectifier.baseband_noise_v == b.passive_rectifier.baseband_noise_v);
    CHECK(back.reader_noise.noise_figure_db == b.reader_noise.noise_figure_db);

    // provenance block records the anchors and the seed
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    CHECK(j["provenance"]["seed"] == 77);
    CHECK(j["provenance"]["converged"] == true);
    CHECK(j["provenance"]["anchors"][0]["observable"] == "amp_q");
    CHECK(j["provenance"]["anchors"][0]["citation"] == "check");
    std::remove(path.c_str());
}

TEST_CASE("sweep CSV formatting is fixed") {
    SweepRow row;
    row.link = Link::Downlink;
    row.distance_m = 35.0;
    row.bit_rate_bps = 20e3;
    row.offset_hz = 0.0;
    row.metrics = LinkMetrics{25.139, 0.000125, 100000, 12, -51.728259, false};

    const std::string csv = sweep_rows_to_csv({row});
    const std::string expected =
        "link,distance_m,bit_rate_bps,offset_hz,p_rx_dbm,eb_n0_db,n_bits,n_errors,ber,"
        "sync_failed\n"
        "down,3.500000e+01,2.000000e+04,0.000000e+00,-5.172826e+01,2.513900e+01,100000,12,"
        "1.250000e-04,0\n";
    CHECK(csv == expected);
}

TEST_CASE("modem block overrides apply and are validated") {
    std::string text = kMinimalModels;
    const std::string modem = R"(,
  "modem": {"ask_sample_rate_hz": 480.0e3, "ask_preamble_bits": 8,
            "ask_threshold_fraction": 0.4, "fsk_samples_per_symbol": 32,
            "fsk_tone0_bin": 5, "fsk_tone1_bin": 6}
})";
    text = text.substr(0, text.rfind('}')) + modem;
    const std::string path = write_temp("modem.json", text);
    const RunConfig cfg = load_run_config(path);
    CHECK(cfg.models.modem.ask_sample_rate_hz == 480e3);
    CHECK(cfg.models.modem.ask_preamble_bits == 8);
    CHECK(cfg.models.modem.ask_threshold_fraction == 0.4);
    CHECK(cfg.models.modem.fsk_samples_per_symbol == 32);
    CHECK(cfg.models.modem.fsk_tone0_bin == 5);
    // the sweep spec picks up the overridden modem defaults
    REQUIRE(cfg.sweep.has_value());
    CHECK(cfg.sweep->models.modem.ask_sample_rate_hz == 480e3);
    std::remove(path.c_str());

    std::string bad = text;
    bad.replace(bad.find("\"fsk_tone1_bin\": 6"), 18, "\"fsk_tone1_bin\": 5");
    const std::string bad_path = write_temp("modem_bad.json", bad);
    CHECK_THROWS_AS(load_run_config(bad_path), ConfigError);
    std::remove(bad_path.c_str());
}

TEST_CASE("calibration block parses with directions and log scales") {
    std::string text = kMinimalModels;
    const std::string calibration = R"(,
  "calibration": {
    "space": [
      {"name": "uplink.sigma_hz", "lower": 1.0e6, "upper": 1.0e9, "log_scale": true}
    ],
    "anchors": [
      {"observable": "uplink_offset_penalty_db_at_20mhz", "target": 10.0, "tolerance": 0.5},
      {"observable": "downlink_offset_penalty_db_at_100mhz", "target": 10.0,
       "tolerance": 0.5, "direction": "ge", "citation": "isolation bound"}
    ]
  }
})";
    text = text.substr(0, text.rfind('}')) + calibration;
    const std::string path = write_temp("cal.json", text);
    const RunConfig cfg = load_run_config(path);
    REQUIRE(cfg.space.has_value());
    REQUIRE(cfg.anchors.has_value());
    CHECK(cfg.space->log_scale.at(0));
    CHECK(cfg.anchors->at(1).direction == Anchor::Direction::AtLeast);
    CHECK(cfg.anchors->at(1).citation == "isolation bound");
    std::remove(path.c_str());
}
