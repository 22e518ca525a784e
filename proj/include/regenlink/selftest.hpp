#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "regenlink/calibrate.hpp"
#include "regenlink/link_eval.hpp"
#include "regenlink/modem.hpp"

namespace regenlink {

struct SelfTestCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace selftest_detail {

// Direct DFT bin, evaluated without the Goertzel recurrence so the two
// routes stay independent.
inline double direct_dft_magnitude(const std::vector<double>& x, std::size_t n, long k) {
    std::complex<double> acc{0.0, 0.0};
    const double w = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j)
        acc += x[j] * std::exp(std::complex<double>(0.0, w * static_cast<double>(j)));
    return std::abs(acc);
}

} // namespace selftest_detail

// Embedded invariant suite behind the `selftest` command. fault_injection
// names a deliberate corruption used to prove the harness can fail; the only
// supported value is "goertzel".
inline std::vector<SelfTestCheck> run_selftest(const std::string& fault_injection = "") {
    std::vector<SelfTestCheck> checks;
    const double goertzel_corruption = (fault_injection == "goertzel") ? 1e-3 : 0.0;

    // Goertzel vs direct DFT
    {
        SelfTestCheck c{"goertzel matches direct DFT", true, ""};
        RandomSource rng(2024, 0);
        for (std::size_t n : {8u, 64u, 256u}) {
            BasebandSignal sig;
            sig.sample_rate_hz = static_cast<double>(n);
            sig.samples.resize(n);
            for (int rep = 0; rep < 10 && c.passed; ++rep) {
                for (double& s : sig.samples)
                    s = 2.0 * rng.next_unit() - 1.0;
                for (long k = 0; k < static_cast<long>(n) / 2; ++k) {
                    const double ref =
                        selftest_detail::direct_dft_magnitude(sig.samples, n, k);
                    const double got =
                        goertzel(sig, static_cast<double>(k), n) + goertzel_corruption;
                    if (std::abs(got - ref) / std::max(1.0, ref) > 1e-9) {
                        c.passed = false;
                        c.detail = "mismatch at n=" + std::to_string(n) +
                                   " k=" + std::to_string(k);
                        break;
                    }
                }
            }
        }
        checks.push_back(c);
    }

    // modem roundtrips, noiseless
    {
        SelfTestCheck c{"ASK/FSK noiseless roundtrips", true, ""};
        const ModelBundle b = default_model_bundle();
        RandomSource rng(7, 1);
        for (double rate : {1e3, 20e3, 200e3}) {
            const BitStream payload = random_bits(2000, rng);
            AskConfig ac = make_ask_config(b, rate);
            ac.sample_rate_hz = 16.0 * rate;
            const DecodeResult ad = ask_demodulate(ask_modulate(payload, ac), ac);
            FskConfig fc = make_fsk_config(b, rate);
            const DecodeResult fd = fsk_demodulate(fsk_modulate(payload, fc), fc);
            if (ad.bits != payload || fd.bits != payload) {
                c.passed = false;
                c.detail = "roundtrip failed at " + std::to_string(rate) + " bps";
                break;
            }
        }
        checks.push_back(c);
    }

    // free-space slope: exactly -6.0206 dB per distance doubling
    {
        SelfTestCheck c{"free-space slope -6.02 dB per doubling", true, ""};
        const LinkGeometry g1{10.0, 26.3e9, 20.0, 20.0};
        const LinkGeometry g2{20.0, 26.3e9, 20.0, 20.0};
        const double drop = friis_received_power_dbm(g1) - friis_received_power_dbm(g2);
        if (std::abs(drop - 20.0 * std::log10(2.0)) > 1e-9) {
            c.passed = false;
            c.detail = "slope " + std::to_string(drop);
        }
        checks.push_back(c);
    }

    // optimizer benchmarks
    {
        SelfTestCheck c{"optimizer benchmarks", true, ""};
        const Objective rosen = [](const std::vector<double>& x) {
            const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
            return a * a + 100.0 * b * b;
        };
        const FitResult nm = nelder_mead(rosen, {-1.2, 1.0});
        const Objective sphere = [](const std::vector<double>& x) {
            double s = 0.0;
            for (double v : x)
                s += v * v;
            return s;
        };
        ParamSpace sp;
        for (int i = 0; i < 5; ++i) {
            sp.names.push_back("x" + std::to_string(i));
            sp.lower.push_back(-5.0);
            sp.upper.push_back(5.0);
        }
        RandomSource rng(0, 0);
        const FitResult ps = particle_swarm(sphere, sp, {}, rng);
        if (nm.loss > 1e-8 || ps.loss > 1e-4) {
            c.passed = false;
            c.detail = "nm=" + std::to_string(nm.loss) + " pso=" + std::to_string(ps.loss);
        }
        checks.push_back(c);
    }

    // unit conversions roundtrip
    {
        SelfTestCheck c{"dBm/watts roundtrip", true, ""};
        for (double p = -120.0; p <= 40.0; p += 0.5) {
            if (std::abs(watts_to_dbm(dbm_to_watts(p)) - p) > 1e-12) {
                c.passed = false;
                c.detail = "at " + std::to_string(p) + " dBm";
                break;
            }
        }
        checks.push_back(c);
    }

    return checks;
}

} // namespace regenlink
