// Command-line front end: deterministic link sweeps, model calibration, and
// a couple of DSP diagnostics. Exit codes: 0 success, 1 selftest failure,
// 2 config/usage error, 3 runtime error, 4 calibration did not converge.

#include <clocale>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regenlink/config.hpp"
#include "regenlink/selftest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSelfTest = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitNotConverged = 4;

int cmd_sweep(const std::string& config_path, const std::string& out_path,
              const std::string& link_override, std::optional<std::uint64_t> seed,
              const std::string& model_path, unsigned threads) {
    regenlink::RunConfig cfg = regenlink::load_run_config(config_path);
    if (!cfg.sweep)
        throw regenlink::ConfigError("config.sweep: missing");
    regenlink::SweepSpec spec = *cfg.sweep;
    if (!model_path.empty()) {
        spec.models = regenlink::load_model_file(model_path, cfg.models.modem);
    }
    if (link_override == "down")
        spec.link = regenlink::Link::Downlink;
    else if (link_override == "up")
        spec.link = regenlink::Link::Uplink;
    else if (!link_override.empty())
        throw regenlink::ConfigError("--link: must be down or up");
    if (seed)
        spec.seed = *seed;

    const std::vector<regenlink::SweepRow> rows = regenlink::run_sweep(spec, threads);
    const std::string csv = regenlink::sweep_rows_to_csv(rows);
    std::ofstream out(out_path, std::ios::binary);
    if (!out)
        throw regenlink::ConfigError("--out: cannot write " + out_path);
    out << csv;
    out.close();

    double ber_min = 1.0, ber_max = 0.0;
    for (const auto& r : rows) {
        ber_min = std::min(ber_min, r.metrics.ber);
        ber_max = std::max(ber_max, r.metrics.ber);
    }
    std::printf("wrote %zu rows to %s; ber min=%.3e max=%.3e; resolvable BER floor ~%.1e "
                "at %ld bits/point\n",
                rows.size(), out_path.c_str(), ber_min, ber_max,
                10.0 / static_cast<double>(spec.bits_per_point), spec.bits_per_point);
    return kExitOk;
}

int cmd_calibrate(const std::string& config_path, const std::string& out_path,
                  std::optional<std::uint64_t> seed) {
    regenlink::RunConfig cfg = regenlink::load_run_config(config_path);
    if (!cfg.space || !cfg.anchors)
        throw regenlink::ConfigError("config.calibration: missing");
    const std::uint64_t used_seed = seed ? *seed : cfg.seed;
    regenlink::RandomSource rng(used_seed, 0);
    const regenlink::CalibratedBundle cal =
        regenlink::fit_models(cfg.models, *cfg.anchors, *cfg.space, rng, cfg.fit_options);

    const auto& obs = regenlink::bundle_observable_registry();
    std::printf("%-44s %10s %10s %8s\n", "anchor", "target", "fitted", "residual");
    for (const regenlink::Anchor& a : *cfg.anchors) {
        const double v = obs.at(a.observable)(cal.bundle);
        std::printf("%-44s %10.4f %10.4f %8.4f\n", a.observable.c_str(), a.target, v,
                    regenlink::anchor_residual(a, v));
    }
    std::printf("loss=%.6g evaluations=%ld converged=%s\n", cal.fit.loss,
                cal.fit.n_evaluations, cal.fit.converged ? "yes" : "no");

    regenlink::write_model_file(out_path, cal.bundle, cal.fit, *cfg.anchors, used_seed);
    std::printf("wrote model to %s\n", out_path.c_str());
    return cal.fit.converged ? kExitOk : kExitNotConverged;
}

int cmd_goertzel(double freq_hz, double rate_hz, long n, const std::string& input_path) {
    std::ifstream in(input_path);
    if (!in)
        throw regenlink::ConfigError("input: cannot open " + input_path);
    regenlink::BasebandSignal sig;
    sig.sample_rate_hz = rate_hz;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        try {
            std::size_t pos = 0;
            const double v = std::stod(line, &pos);
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos])))
                ++pos;
            if (pos != line.size() || !std::isfinite(v))
                throw std::invalid_argument("trailing characters");
            sig.samples.push_back(v);
        } catch (const std::exception&) {
            throw regenlink::ConfigError("input: malformed sample at line " +
                                         std::to_string(line_no));
        }
    }
    if (static_cast<long>(sig.samples.size()) < n)
        throw regenlink::ConfigError("input: file has " + std::to_string(sig.samples.size()) +
                                     " samples, need " + std::to_string(n));
    const double mag = regenlink::goertzel(sig, freq_hz, static_cast<std::size_t>(n));
    std::printf("%.12f\n", mag);
    return kExitOk;
}

int cmd_selftest(const std::string& fault) {
    const std::vector<regenlink::SelfTestCheck> checks = regenlink::run_selftest(fault);
    bool all = true;
    for (const auto& c : checks) {
        std::printf("[%s] %s%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.empty() ? "" : ": ", c.detail.c_str());
        all = all && c.passed;
    }
    return all ? kExitOk : kExitSelfTest;
}

} // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");

    CLI::App app{"regenlink: full-duplex backscatter link simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 1;
    app.add_option("--threads", threads, "worker threads for sweep points (results identical)");

    std::string config_path, out_path, link_override, model_path;
    std::uint64_t seed_value = 0;
    bool seed_given = false;

    CLI::App* sweep = app.add_subcommand("sweep", "run a BER/Eb-N0 sweep and write CSV");
    sweep->add_option("config", config_path, "JSON run config")->required();
    sweep->add_option("--out", out_path, "output CSV path")->required();
    sweep->add_option("--link", link_override, "override sweep link: down|up");
    sweep->add_option("--model", model_path, "calibrated model JSON overriding config models");
    sweep->add_option("--seed", seed_value, "RNG seed (defaults to 0 / config seed)")
        ->each([&](const std::string&) { seed_given = true; });

    CLI::App* cal = app.add_subcommand("calibrate", "fit model parameters to the anchor set");
    cal->add_option("config", config_path, "JSON run config")->required();
    cal->add_option("--out", out_path, "output model JSON path")->required();
    cal->add_option("--seed", seed_value, "RNG seed")
        ->each([&](const std::string&) { seed_given = true; });

    double g_freq = 0.0, g_rate = 0.0;
    long g_n = 0;
    std::string g_input;
    CLI::App* goe = app.add_subcommand("goertzel", "single-bin DFT magnitude of a sample file");
    goe->add_option("--freq", g_freq, "target frequency, Hz")->required();
    goe->add_option("--rate", g_rate, "sample rate, Hz")->required();
    goe->add_option("--n", g_n, "window length, samples")->required();
    goe->add_option("input", g_input, "text file, one sample per line")->required();

    std::string fault;
    CLI::App* self = app.add_subcommand("selftest", "run the embedded invariant suite");
    self->add_option("--inject-fault", fault, "test hook: corrupt a named path (goertzel)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) // --help
            return app.exit(e);
        app.exit(e);
        return kExitConfig;
    }

    try {
        const std::optional<std::uint64_t> seed =
            seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
        if (*sweep)
            return cmd_sweep(config_path, out_path, link_override, seed, model_path, threads);
        if (*cal)
            return cmd_calibrate(config_path, out_path, seed);
        if (*goe) {
            if (!(g_rate > 0.0) || g_n <= 0)
                throw regenlink::ConfigError("goertzel: --rate and --n must be > 0");
            return cmd_goertzel(g_freq, g_rate, g_n, g_input);
        }
        if (*self)
            return cmd_selftest(fault);
    } catch (const regenlink::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitConfig;
}
