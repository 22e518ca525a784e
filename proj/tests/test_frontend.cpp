#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "regenlink/frontend.hpp"

using namespace regenlink;

TEST_CASE("closed_loop_gain") {
    CHECK(closed_loop_gain({10.0, 0.0, 0.0}) == Catch::Approx(10.0));
    CHECK(closed_loop_gain({100.0, 0.0099, 0.0}) == Catch::Approx(10000.0).epsilon(1e-9));
    CHECK_THROWS_AS(closed_loop_gain({10.0, 0.1, 0.0}), OscillationError);

    SECTION("gain is strictly increasing in feedback below unity loop gain") {
        const double g = 40.0;
        double prev = closed_loop_gain({g, 0.0, 0.0});
        for (double f = 0.001; f * g < 0.999; f += 0.001) {
            const double cur = closed_loop_gain({g, f, 0.0});
            CHECK(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("barkhausen_check") {
    SECTION("unity loop gain with 360 degree phase oscillates") {
        const BarkhausenVerdict v = barkhausen_check({1.0, 1.0, 360.0});
        CHECK(v.oscillating);
    }
    SECTION("half loop gain in phase is stable with 6.02 dB margin") {
        const BarkhausenVerdict v = barkhausen_check({0.5, 1.0, 0.0});
        CHECK_FALSE(v.oscillating);
        CHECK(v.gain_margin_db == Catch::Approx(6.0206).margin(1e-3));
    }
    SECTION("excess gain off phase stays stable") {
        const BarkhausenVerdict v = barkhausen_check({2.0, 1.0, 180.0});
        CHECK_FALSE(v.oscillating);
        CHECK(v.phase_margin_deg == Catch::Approx(180.0));
    }
    SECTION("phase wraps modulo 360") {
        CHECK(barkhausen_check({1.5, 1.0, 720.0}).oscillating);
        CHECK(barkhausen_check({1.5, 1.0, -360.0}).oscillating);
    }
    SECTION("phase tolerance widens the oscillation window") {
        CHECK_FALSE(barkhausen_check({1.5, 1.0, 3.0}).oscillating);
        CHECK(barkhausen_check({1.5, 1.0, 3.0}, 5.0).oscillating);
    }
    SECTION("unity loop gain trips the closed-loop guard at a wider epsilon") {
        CHECK_THROWS_AS(closed_loop_gain({10.0, 0.0999999, 0.0}, 1e-3), OscillationError);
        CHECK_NOTHROW(closed_loop_gain({10.0, 0.0999999, 0.0}));
    }
}

TEST_CASE("quality_factor") {
    CHECK(quality_factor({0, 0, 50.0, 5.0, 0.0}) == Catch::Approx(10.0));
    CHECK(quality_factor({0, 0, 50.0, 5.0, 4.75}) == Catch::Approx(200.0).epsilon(1e-12));
    CHECK_THROWS_AS(quality_factor({0, 0, 50.0, 5.0, 5.0}), OscillationError);
    CHECK_THROWS_AS(quality_factor({0, 0, 50.0, 5.0, 6.0}), OscillationError);

    SECTION("strictly increasing in the negative resistance") {
        double prev = 0.0;
        for (double rn = 0.0; rn < 5.0; rn += 0.05) {
            const double q = quality_factor({0, 0, 50.0, 5.0, rn});
            CHECK(q > prev);
            prev = q;
        }
    }
}

TEST_CASE("resonant_frequency") {
    CHECK(resonant_frequency(1e-9, 1e-12).hz == Catch::Approx(5.0329e9).epsilon(1e-4));
    CHECK(resonant_frequency(1.0, 1.0).hz == Catch::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-12));
    SECTION("scaling L by 4 halves f0") {
        const double f1 = resonant_frequency(1e-9, 1e-12).hz;
        const double f2 = resonant_frequency(4e-9, 1e-12).hz;
        CHECK(f2 == Catch::Approx(f1 / 2.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(resonant_frequency(0.0, 1e-12), std::domain_error);
    CHECK_THROWS_AS(resonant_frequency(1e-9, -1.0), std::domain_error);
}

TEST_CASE("interdig_capacitance") {
    SECTION("three fingers give zero capacitance") {
        CHECK(interdig_capacitance({4.0, 1e-3, 3, 1e-12, 1e-12}) == 0.0);
    }
    SECTION("direct evaluation") {
        CHECK(interdig_capacitance({3.66, 1e-3, 10, 0.5e-12, 0.5e-12}) ==
              Catch::Approx(3.262e-14).epsilon(1e-4));
    }
    SECTION("linear in finger length, affine in finger count") {
        const InterdigCapParams p{2.2, 2e-3, 8, 0.4e-12, 0.6e-12};
        InterdigCapParams doubled = p;
        doubled.finger_length_m *= 2.0;
        CHECK(interdig_capacitance(doubled) ==
              Catch::Approx(2.0 * interdig_capacitance(p)).epsilon(1e-12));
        InterdigCapParams plus1 = p;
        plus1.n_fingers += 1;
        InterdigCapParams plus2 = p;
        plus2.n_fingers += 2;
        const double step1 = interdig_capacitance(plus1) - interdig_capacitance(p);
        const double step2 = interdig_capacitance(plus2) - interdig_capacitance(plus1);
        CHECK(step1 == Catch::Approx(step2).epsilon(1e-12));
    }
    CHECK_THROWS_AS(interdig_capacitance({4.0, 1e-3, 2, 1e-12, 1e-12}), std::domain_error);
}

TEST_CASE("parallel_plate_capacitance") {
    CHECK(parallel_plate_capacitance(1.0, 1.0, 1.0) == Catch::Approx(1.0));
    CHECK(parallel_plate_capacitance(1e-6, 8.854e-12, 1e-4) ==
          Catch::Approx(8.854e-14).epsilon(1e-12));
    SECTION("halving the gap doubles capacitance") {
        CHECK(parallel_plate_capacitance(2.0, 3.0, 0.5) ==
              Catch::Approx(2.0 * parallel_plate_capacitance(2.0, 3.0, 1.0)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(parallel_plate_capacitance(1.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("amp_gain compression and selectivity") {
    const AmplifierBehavioral a; // defaults: 30 dB @ -40 dBm down to 15 dB @ -10 dBm

    CHECK(amp_gain_db(a, -40.0, a.f0_hz) == Catch::Approx(30.0).margin(1e-9));
    CHECK(amp_gain_db(a, -10.0, a.f0_hz) == Catch::Approx(15.0).margin(1e-9));
    CHECK(amp_gain_db(a, -60.0, a.f0_hz) == Catch::Approx(30.0));
    CHECK(amp_gain_db(a, 0.0, a.f0_hz) == Catch::Approx(15.0));
    CHECK(amp_gain_db(a, -25.0, a.f0_hz) == Catch::Approx(22.5));

    SECTION("half-power point sits f0/(2Q) off resonance") {
        const double off = a.f0_hz / (2.0 * a.q); // 61.857 MHz at the defaults
        CHECK(off == Catch::Approx(61.857e6).epsilon(1e-4));
        const double drop =
            amp_gain_db(a, -40.0, a.f0_hz) - amp_gain_db(a, -40.0, a.f0_hz + off);
        CHECK(drop == Catch::Approx(3.0103).margin(1e-3));
    }
    SECTION("selectivity is symmetric and zero at resonance") {
        CHECK(amp_selectivity_db(a, a.f0_hz) == 0.0);
        for (double off : {1e6, 20e6, 61.857e6, 150e6}) {
            CHECK(amp_selectivity_db(a, a.f0_hz + off) ==
                  Catch::Approx(amp_selectivity_db(a, a.f0_hz - off)).epsilon(1e-12));
            CHECK(amp_selectivity_db(a, a.f0_hz + off) < 0.0);
        }
    }
    SECTION("half-power full bandwidth equals f0/Q within 0.1%") {
        // bisect the selectivity for the -3.0103 dB point
        double lo = 0.0, hi = a.f0_hz;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (amp_selectivity_db(a, a.f0_hz + mid) > -3.010299957)
                lo = mid;
            else
                hi = mid;
        }
        const double full_bw = 2.0 * lo;
        CHECK(full_bw == Catch::Approx(a.f0_hz / a.q).epsilon(1e-3));
    }
    SECTION("compression is monotone nonincreasing and bounded") {
        double prev = amp_compression_db(a, -80.0);
        for (double p = -80.0; p <= 10.0; p += 0.25) {
            const double g = amp_compression_db(a, p);
            CHECK(g <= prev + 1e-12);
            CHECK(g <= a.g_small_db);
            CHECK(g >= a.g_sat_db);
            prev = g;
        }
    }
}

TEST_CASE("amp_apply") {
    const AmplifierBehavioral a;
    BasebandSignal sig{std::vector<double>(100, 0.5), 1000.0};

    SECTION("linear mode adds the gain to the input power") {
        const AmpOutput out = amp_apply(a, sig, -40.0, a.f0_hz, false);
        CHECK(out.p_out_dbm == Catch::Approx(-10.0).margin(1e-9));
        CHECK(out.signal.samples[0] ==
              Catch::Approx(0.5 * std::pow(10.0, 30.0 / 20.0)).epsilon(1e-12));
    }
    SECTION("saturated mode clamps to p_sat_out for any strong input") {
        double first = 0.0;
        for (double p_in : {-50.0, -40.0, -30.0}) {
            const AmpOutput out = amp_apply(a, sig, p_in, a.f0_hz, true);
            CHECK(out.p_out_dbm == a.p_sat_out_dbm);
            if (first == 0.0)
                first = out.p_out_dbm;
            CHECK(out.p_out_dbm == first);
        }
    }
    SECTION("saturated mode passes through when the boosted level is too weak") {
        const AmpOutput out = amp_apply(a, sig, -90.0, a.f0_hz, true);
        CHECK(out.p_out_dbm == Catch::Approx(-60.0).margin(1e-9));
    }
    SECTION("zero-amplitude input stays zero") {
        BasebandSignal zero{std::vector<double>(10, 0.0), 1000.0};
        const AmpOutput out = amp_apply(a, zero, -40.0, a.f0_hz, false);
        for (double s : out.signal.samples)
            CHECK(s == 0.0);
    }
    SECTION("empty signal rejected") {
        BasebandSignal empty{{}, 1000.0};
        CHECK_THROWS_AS(amp_apply(a, empty, -40.0, a.f0_hz, false), std::domain_error);
    }
}

TEST_CASE("rectifier transfer") {
    const RectifierModel r; // defaults: -60 dBm floor, knee at -10 dBm, 0.1 V scale

    SECTION("output equals v_scale at the linear knee") {
        CHECK(rectifier_transfer_v(r, dbm_to_watts(r.p_linear_dbm)) ==
              Catch::Approx(r.v_scale_v).epsilon(1e-12));
    }
    SECTION("noiseless transfer is continuous at the knee") {
        const double w = dbm_to_watts(r.p_linear_dbm);
        CHECK(rectifier_transfer_v(r, w * (1.0 - 1e-9)) ==
              Catch::Approx(rectifier_transfer_v(r, w * (1.0 + 1e-9))).epsilon(1e-6));
    }
    SECTION("monotone nondecreasing over a 200-point grid from -80 to 0 dBm") {
        double prev = -1.0;
        for (int i = 0; i < 200; ++i) {
            const double p = -80.0 + 80.0 * i / 199.0;
            const double v = rectifier_transfer_v(r, dbm_to_watts(p));
            CHECK(v >= prev);
            prev = v;
        }
    }
    SECTION("derived sensitivity matches the stored field at the defaults") {
        CHECK(rectifier_derived_sensitivity_dbm(r) ==
              Catch::Approx(r.sensitivity_dbm).margin(1e-6));
    }
    SECTION("20 dB below sensitivity the signal sits under the noise floor") {
        const double v = rectifier_transfer_v(r, dbm_to_watts(r.sensitivity_dbm - 20.0));
        CHECK(v < r.baseband_noise_v);
        CHECK(v / r.baseband_noise_v == Catch::Approx(0.01).epsilon(1e-9));
    }
    SECTION("a sub-unity exponent keeps continuity, monotonicity, and the "
            "derived-sensitivity inversion") {
        RectifierModel soft = r;
        soft.exponent_low = 0.5;
        const double w_lin = dbm_to_watts(soft.p_linear_dbm);
        CHECK(rectifier_transfer_v(soft, w_lin * (1.0 - 1e-9)) ==
              Catch::Approx(rectifier_transfer_v(soft, w_lin * (1.0 + 1e-9))).epsilon(1e-6));
        double prev = -1.0;
        for (int i = 0; i < 200; ++i) {
            const double p = -80.0 + 80.0 * i / 199.0;
            const double v = rectifier_transfer_v(soft, dbm_to_watts(p));
            CHECK(v >= prev);
            prev = v;
        }
        const double sens = rectifier_derived_sensitivity_dbm(soft);
        CHECK(rectifier_transfer_v(soft, dbm_to_watts(sens)) ==
              Catch::Approx(soft.baseband_noise_v).epsilon(1e-9));
    }
}

TEST_CASE("rectifier_envelope") {
    const RectifierModel r;

    SECTION("dBm and watts entry points agree") {
        std::vector<double> dbm{-60.0, -40.0, -20.0, -10.0, -5.0};
        std::vector<double> w(dbm.size());
        for (std::size_t i = 0; i < dbm.size(); ++i)
            w[i] = dbm_to_watts(dbm[i]);
        RandomSource r1(4, 0), r2(4, 0);
        const BasebandSignal a = rectifier_envelope(r, dbm, 1000.0, r1);
        const BasebandSignal b = rectifier_envelope_watts(r, w, 1000.0, r2);
        for (std::size_t i = 0; i < dbm.size(); ++i)
            CHECK(a.samples[i] == Catch::Approx(b.samples[i]).margin(1e-15));
    }
    SECTION("noise has the configured RMS") {
        RectifierModel rn = r;
        rn.baseband_noise_v = 1e-3;
        std::vector<double> w(200000, 0.0);
        RandomSource rng(8, 1);
        const BasebandSignal out = rectifier_envelope_watts(rn, w, 1000.0, rng);
        double var = 0.0;
        for (double s : out.samples)
            var += s * s;
        var /= static_cast<double>(out.samples.size());
        CHECK(std::sqrt(var) == Catch::Approx(1e-3).epsilon(0.02));
    }
    SECTION("empty trace rejected") {
        RandomSource rng(1, 1);
        CHECK_THROWS_AS(rectifier_envelope(r, {}, 1000.0, rng), std::domain_error);
    }
}
