#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "regenlink/errors.hpp"
#include "regenlink/link_eval.hpp"
#include "regenlink/rng.hpp"

namespace regenlink {

// ---------------------------------------------------------------------------
// Derivative-free optimizers
// ---------------------------------------------------------------------------

using Objective = std::function<double(const std::vector<double>&)>;

struct ParamSpace {
    std::vector<std::string> names;
    std::vector<double> lower;
    std::vector<double> upper;
    // Parameters spanning decades are searched in log10 coordinates; the
    // bounds stay in natural units either way.
    std::vector<bool> log_scale;

    std::size_t dim() const { return names.size(); }
    bool is_log(std::size_t i) const { return i < log_scale.size() && log_scale[i]; }
};

inline void validate_space(const ParamSpace& s) {
    if (s.names.empty())
        throw ConfigError("param_space: must be nonempty");
    if (s.lower.size() != s.names.size() || s.upper.size() != s.names.size())
        throw ConfigError("param_space: names/lower/upper size mismatch");
    if (!s.log_scale.empty() && s.log_scale.size() != s.names.size())
        throw ConfigError("param_space: log_scale size mismatch");
    for (std::size_t i = 0; i < s.names.size(); ++i) {
        if (!(s.lower[i] < s.upper[i]))
            throw ConfigError("param_space." + s.names[i] + ": lower must be < upper");
        if (s.is_log(i) && !(s.lower[i] > 0.0))
            throw ConfigError("param_space." + s.names[i] +
                              ": log-scale bounds must be > 0");
        for (std::size_t j = i + 1; j < s.names.size(); ++j)
            if (s.names[i] == s.names[j])
                throw ConfigError("param_space." + s.names[i] + ": duplicate name");
    }
}

// The box as the optimizers see it (log10 coordinates where requested).
inline ParamSpace search_space(const ParamSpace& s) {
    ParamSpace t = s;
    t.log_scale.clear();
    for (std::size_t i = 0; i < s.dim(); ++i) {
        if (s.is_log(i)) {
            t.lower[i] = std::log10(s.lower[i]);
            t.upper[i] = std::log10(s.upper[i]);
        }
    }
    return t;
}

inline std::vector<double> to_search_coords(const ParamSpace& s, std::vector<double> x) {
    for (std::size_t i = 0; i < s.dim(); ++i)
        if (s.is_log(i))
            x[i] = std::log10(x[i]);
    return x;
}

inline std::vector<double> from_search_coords(const ParamSpace& s, std::vector<double> x) {
    for (std::size_t i = 0; i < s.dim(); ++i)
        if (s.is_log(i))
            x[i] = std::pow(10.0, x[i]);
    return x;
}

struct FitResult {
    std::vector<double> params;
    double loss = 0.0;
    long n_evaluations = 0;
    bool converged = false;
};

namespace detail {

inline double checked_eval(const Objective& f, const std::vector<double>& x, long& evals) {
    const double v = f(x);
    ++evals;
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "objective returned a non-finite value at (";
        for (std::size_t i = 0; i < x.size(); ++i)
            os << (i ? ", " : "") << x[i];
        os << ")";
        throw EvaluationError(os.str());
    }
    return v;
}

inline void clamp_to(const ParamSpace* space, std::vector<double>& x) {
    if (!space)
        return;
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], space->lower[i], space->upper[i]);
}

} // namespace detail

struct NelderMeadOptions {
    long max_iter = 500;
    double x_tol = 1e-10;
    double f_tol = 1e-12;
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    // optional hook, called once per iteration with the current best loss
    std::function<void(long, double)> observer;
};

// Standard downhill simplex. The initial simplex offsets each coordinate by
// 5% (0.00025 when the coordinate is zero). When bounds are given, every
// trial point is projected into the box before evaluation.
inline FitResult nelder_mead(const Objective& objective, const std::vector<double>& x0,
                             const NelderMeadOptions& opts = {},
                             const ParamSpace* bounds = nullptr) {
    if (x0.empty())
        throw ConfigError("nelder_mead: empty start point");
    const std::size_t dim = x0.size();
    long evals = 0;

    auto eval = [&](std::vector<double> x) {
        detail::clamp_to(bounds, x);
        return detail::checked_eval(objective, x, evals);
    };

    std::vector<std::vector<double>> vx(dim + 1, x0);
    for (std::size_t i = 0; i < dim; ++i)
        vx[i + 1][i] += (x0[i] != 0.0) ? 0.05 * x0[i] : 0.00025;
    if (bounds)
        for (auto& v : vx)
            detail::clamp_to(bounds, v);
    std::vector<double> vf(dim + 1);
    for (std::size_t i = 0; i <= dim; ++i)
        vf[i] = eval(vx[i]);

    std::vector<std::size_t> order(dim + 1);
    bool converged = false;
    long iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return vf[a] < vf[b]; });
        const std::size_t best = order[0], worst = order[dim], second = order[dim - 1];

        if (opts.observer)
            opts.observer(iter, vf[best]);

        double diameter = 0.0;
        for (std::size_t i = 0; i < dim; ++i)
            diameter = std::max(diameter, std::abs(vx[worst][i] - vx[best][i]));
        if (diameter < opts.x_tol || std::abs(vf[worst] - vf[best]) < opts.f_tol) {
            converged = true;
            break;
        }

        std::vector<double> centroid(dim, 0.0);
        for (std::size_t v = 0; v <= dim; ++v) {
            if (v == worst)
                continue;
            for (std::size_t i = 0; i < dim; ++i)
                centroid[i] += vx[v][i];
        }
        for (double& c : centroid)
            c /= static_cast<double>(dim);

        auto along = [&](double t) {
            std::vector<double> p(dim);
            for (std::size_t i = 0; i < dim; ++i)
                p[i] = centroid[i] + t * (vx[worst][i] - centroid[i]);
            return p;
        };

        std::vector<double> xr = along(-opts.reflection);
        detail::clamp_to(bounds, xr);
        const double fr = eval(xr);
        if (fr < vf[best]) {
            std::vector<double> xe = along(-opts.reflection * opts.expansion);
            detail::clamp_to(bounds, xe);
            const double fe = eval(xe);
            if (fe < fr) {
                vx[worst] = std::move(xe);
                vf[worst] = fe;
            } else {
                vx[worst] = std::move(xr);
                vf[worst] = fr;
            }
        } else if (fr < vf[second]) {
            vx[worst] = std::move(xr);
            vf[worst] = fr;
        } else {
            const bool outside = fr < vf[worst];
            std::vector<double> xc = along(outside ? -opts.reflection * opts.contraction
                                                   : opts.contraction);
            detail::clamp_to(bounds, xc);
            const double fc = eval(xc);
            if (fc < (outside ? fr : vf[worst])) {
                vx[worst] = std::move(xc);
                vf[worst] = fc;
            } else {
                for (std::size_t v = 0; v <= dim; ++v) {
                    if (v == best)
                        continue;
                    for (std::size_t i = 0; i < dim; ++i)
                        vx[v][i] = vx[best][i] + opts.shrink * (vx[v][i] - vx[best][i]);
                    detail::clamp_to(bounds, vx[v]);
                    vf[v] = eval(vx[v]);
                }
            }
        }
    }

    const std::size_t best =
        std::distance(vf.begin(), std::min_element(vf.begin(), vf.end()));
    return FitResult{vx[best], vf[best], evals, converged};
}

struct ParticleSwarmOptions {
    int n_particles = 40;
    long n_iters = 200;
    double inertia = 0.729;
    double cognitive = 1.49445;
    double social = 1.49445;
    // optional incumbent: becomes particle 0 so the swarm never regresses
    // behind a known-good starting point
    std::vector<double> x0;
    std::function<void(long, double)> observer;
};

// Global-best PSO with positions clamped to the box. Particles are visited
// in a fixed order and all draws come from the supplied stream, so a given
// seed reproduces the search exactly.
inline FitResult particle_swarm(const Objective& objective, const ParamSpace& space,
                                const ParticleSwarmOptions& opts, RandomSource& rng) {
    validate_space(space);
    const std::size_t dim = space.dim();
    const int np = opts.n_particles;
    if (np < 1)
        throw ConfigError("particle_swarm.n_particles: must be >= 1");
    if (!opts.x0.empty() && opts.x0.size() != dim)
        throw ConfigError("particle_swarm.x0: dimension mismatch");
    long evals = 0;

    std::vector<std::vector<double>> pos(np, std::vector<double>(dim));
    std::vector<std::vector<double>> vel(np, std::vector<double>(dim, 0.0));
    std::vector<std::vector<double>> best_pos(np);
    std::vector<double> best_loss(np);
    std::vector<double> gbest;
    double gloss = std::numeric_limits<double>::infinity();

    for (int p = 0; p < np; ++p) {
        for (std::size_t i = 0; i < dim; ++i)
            pos[p][i] = space.lower[i] + rng.next_unit() * (space.upper[i] - space.lower[i]);
        if (p == 0 && !opts.x0.empty()) {
            pos[p] = opts.x0;
            detail::clamp_to(&space, pos[p]);
        }
        best_pos[p] = pos[p];
        best_loss[p] = detail::checked_eval(objective, pos[p], evals);
        if (best_loss[p] < gloss) {
            gloss = best_loss[p];
            gbest = pos[p];
        }
    }

    for (long it = 0; it < opts.n_iters; ++it) {
        for (int p = 0; p < np; ++p) {
            for (std::size_t i = 0; i < dim; ++i) {
                const double r1 = rng.next_unit();
                const double r2 = rng.next_unit();
                vel[p][i] = opts.inertia * vel[p][i] +
                            opts.cognitive * r1 * (best_pos[p][i] - pos[p][i]) +
                            opts.social * r2 * (gbest[i] - pos[p][i]);
                pos[p][i] = std::clamp(pos[p][i] + vel[p][i], space.lower[i], space.upper[i]);
            }
            const double loss = detail::checked_eval(objective, pos[p], evals);
            if (loss < best_loss[p]) {
                best_loss[p] = loss;
                best_pos[p] = pos[p];
            }
            if (loss < gloss) {
                gloss = loss;
                gbest = pos[p];
            }
        }
        if (opts.observer)
            opts.observer(it, gloss);
    }
    return FitResult{gbest, gloss, evals, true};
}

// ---------------------------------------------------------------------------
// Model-bundle parameter and observable registries
// ---------------------------------------------------------------------------

using ParamAccess = std::pair<std::function<double(const ModelBundle&)>,
                              std::function<void(ModelBundle&, double)>>;

inline const std::map<std::string, ParamAccess>& bundle_param_registry() {
    static const std::map<std::string, ParamAccess> registry = [] {
        std::map<std::string, ParamAccess> m;
        auto reg = [&m](const std::string& name, auto getter, auto setter) {
            m.emplace(name, ParamAccess{getter, setter});
        };
        reg("amplifier.g_small_db",
            [](const ModelBundle& b) { return b.amplifier.g_small_db; },
            [](ModelBundle& b, double v) { b.amplifier.g_small_db = v; });
        reg("amplifier.g_sat_db",
            [](const ModelBundle& b) { return b.amplifier.g_sat_db; },
            [](ModelBundle& b, double v) { b.amplifier.g_sat_db = v; });
        reg("amplifier.q",
            [](const ModelBundle& b) { return b.amplifier.q; },
            [](ModelBundle& b, double v) { b.amplifier.q = v; });
        reg("amplifier.p_sat_out_dbm",
            [](const ModelBundle& b) { return b.amplifier.p_sat_out_dbm; },
            [](ModelBundle& b, double v) { b.amplifier.p_sat_out_dbm = v; });
        reg("rectifier.v_scale_v",
            [](const ModelBundle& b) { return b.rectifier.v_scale_v; },
            [](ModelBundle& b, double v) { b.rectifier.v_scale_v = v; });
        reg("rectifier.p_linear_dbm",
            [](const ModelBundle& b) { return b.rectifier.p_linear_dbm; },
            [](ModelBundle& b, double v) { b.rectifier.p_linear_dbm = v; });
        reg("rectifier.baseband_noise_v",
            [](const ModelBundle& b) { return b.rectifier.baseband_noise_v; },
            [](ModelBundle& b, double v) { b.rectifier.baseband_noise_v = v; });
        reg("rectifier.noise_bandwidth_hz",
            [](const ModelBundle& b) { return b.rectifier.noise_bandwidth_hz; },
            [](ModelBundle& b, double v) { b.rectifier.noise_bandwidth_hz = v; });
        reg("uplink.sigma_hz",
            [](const ModelBundle& b) { return b.uplink_sigma_hz; },
            [](ModelBundle& b, double v) { b.uplink_sigma_hz = v; });
        reg("uplink.reader_rx_gain_dbi",
            [](const ModelBundle& b) { return b.uplink_reader_rx_gain_dbi; },
            [](ModelBundle& b, double v) { b.uplink_reader_rx_gain_dbi = v; });
        reg("uplink.noise_figure_db",
            [](const ModelBundle& b) { return b.reader_noise.noise_figure_db; },
            [](ModelBundle& b, double v) { b.reader_noise.noise_figure_db = v; });
        return m;
    }();
    return registry;
}

// Scalar quantities the calibration anchors can target. Each is a pure
// function of the bundle.
inline const std::map<std::string, std::function<double(const ModelBundle&)>>&
bundle_observable_registry() {
    static const std::map<std::string, std::function<double(const ModelBundle&)>> registry =
        [] {
            std::map<std::string, std::function<double(const ModelBundle&)>> m;
            m.emplace("amp_gain_db_at_minus40dbm", [](const ModelBundle& b) {
                return amp_gain_db(b.amplifier, -40.0, b.amplifier.f0_hz);
            });
            m.emplace("amp_gain_db_at_minus10dbm", [](const ModelBundle& b) {
                return amp_gain_db(b.amplifier, -10.0, b.amplifier.f0_hz);
            });
            m.emplace("amp_q", [](const ModelBundle& b) { return b.amplifier.q; });
            m.emplace("amp_half_power_bandwidth_hz", [](const ModelBundle& b) {
                return b.amplifier.f0_hz / b.amplifier.q;
            });
            m.emplace("rect_sensitivity_dbm", [](const ModelBundle& b) {
                return rectifier_derived_sensitivity_dbm(b.rectifier);
            });
            m.emplace("passive_rect_sensitivity_dbm", [](const ModelBundle& b) {
                return rectifier_derived_sensitivity_dbm(b.passive_rectifier);
            });
            m.emplace("uplink_offset_penalty_db_at_20mhz", [](const ModelBundle& b) {
                const OffsetPenaltyModel pen{OffsetPenaltyKind::UplinkCoherence,
                                             b.uplink_sigma_hz};
                return offset_penalty_db(pen, b.amplifier, 20e6);
            });
            m.emplace("downlink_offset_penalty_db_at_100mhz", [](const ModelBundle& b) {
                const OffsetPenaltyModel pen{OffsetPenaltyKind::DownlinkResonance, 0.0};
                return offset_penalty_db(pen, b.amplifier, 100e6);
            });
            m.emplace("downlink_ebn0_db_at_200m_20kbps", [](const ModelBundle& b) {
                return analytic_downlink_ebn0_db(b, 200.0, 20e3, 0.0);
            });
            m.emplace("uplink_ebn0_db_at_5m_200kbps", [](const ModelBundle& b) {
                return analytic_uplink_ebn0_db(b, 5.0, 200e3, 0.0);
            });
            m.emplace("downlink_log10_ber_at_200m_20kbps", [](const ModelBundle& b) {
                return std::log10(predicted_downlink_ber(b, 200.0, 20e3, 0.0));
            });
            m.emplace("downlink_log10_ber_at_35m_60kbps", [](const ModelBundle& b) {
                return std::log10(predicted_downlink_ber(b, 35.0, 60e3, 0.0));
            });
            m.emplace("uplink_log10_ber_at_5m_200kbps", [](const ModelBundle& b) {
                return std::log10(predicted_uplink_ber(b, 5.0, 200e3, 0.0));
            });
            m.emplace("uplink_log10_ber_at_40m_500bps", [](const ModelBundle& b) {
                return std::log10(predicted_uplink_ber(b, 40.0, 500.0, 0.0));
            });
            // identity observables let anchors pin a parameter directly
            for (const auto& [name, access] : bundle_param_registry())
                m.emplace("param:" + name, access.first);
            return m;
        }();
    return registry;
}

// ---------------------------------------------------------------------------
// Anchored fit
// ---------------------------------------------------------------------------

struct Anchor {
    std::string observable;
    double target = 0.0;
    double tolerance = 1.0;
    double weight = 1.0;
    enum class Direction { Equal, AtMost, AtLeast } direction = Direction::Equal;
    std::string citation; // provenance of the target value, carried to the model file
};

using AnchorSet = std::vector<Anchor>;

inline void validate_anchors(const AnchorSet& anchors) {
    if (anchors.empty())
        throw ConfigError("anchors: must be nonempty");
    const auto& obs = bundle_observable_registry();
    for (const Anchor& a : anchors) {
        if (!obs.count(a.observable))
            throw ConfigError("anchors." + a.observable + ": unknown observable");
        if (!(a.tolerance > 0.0))
            throw ConfigError("anchors." + a.observable + ": tolerance must be > 0");
        if (!(a.weight > 0.0))
            throw ConfigError("anchors." + a.observable + ": weight must be > 0");
    }
}

inline double anchor_residual(const Anchor& a, double observed) {
    switch (a.direction) {
    case Anchor::Direction::Equal:
        return (observed - a.target) / a.tolerance;
    case Anchor::Direction::AtMost:
        return std::max(0.0, (observed - a.target) / a.tolerance);
    case Anchor::Direction::AtLeast:
        return std::max(0.0, (a.target - observed) / a.tolerance);
    }
    return 0.0;
}

inline double anchor_loss(const ModelBundle& b, const AnchorSet& anchors) {
    const auto& obs = bundle_observable_registry();
    double loss = 0.0;
    for (const Anchor& a : anchors) {
        const double r = anchor_residual(a, obs.at(a.observable)(b));
        loss += a.weight * r * r;
    }
    return loss;
}

struct FitOptions {
    ParticleSwarmOptions pso;
    NelderMeadOptions nelder_mead;
};

struct CalibratedBundle {
    ModelBundle bundle;
    FitResult fit;
};

// Broad swarm exploration over the parameter box followed by simplex
// refinement from the swarm's best point. Convergence means every anchor sits
// within its tolerance at the returned parameters.
inline CalibratedBundle fit_models(const ModelBundle& base, const AnchorSet& anchors,
                                   const ParamSpace& space, RandomSource& rng,
                                   const FitOptions& opts = {}) {
    validate_anchors(anchors);
    validate_space(space);
    const auto& params = bundle_param_registry();
    for (const std::string& name : space.names)
        if (!params.count(name))
            throw ConfigError("param_space." + name + ": unknown parameter");

    const ParamSpace box = search_space(space);
    auto apply = [&](const std::vector<double>& coords) {
        const std::vector<double> x = from_search_coords(space, coords);
        ModelBundle b = base;
        for (std::size_t i = 0; i < space.names.size(); ++i)
            params.at(space.names[i]).second(b, x[i]);
        return b;
    };
    Objective objective = [&](const std::vector<double>& coords) {
        return anchor_loss(apply(coords), anchors);
    };

    ParticleSwarmOptions pso_opts = opts.pso;
    if (pso_opts.x0.empty()) {
        std::vector<double> x0;
        x0.reserve(space.names.size());
        for (const std::string& name : space.names)
            x0.push_back(params.at(name).first(base));
        pso_opts.x0 = to_search_coords(space, std::move(x0));
    }
    const FitResult coarse = particle_swarm(objective, box, pso_opts, rng);
    FitResult fine = nelder_mead(objective, coarse.params, opts.nelder_mead, &box);
    fine.n_evaluations += coarse.n_evaluations;

    ModelBundle fitted = apply(fine.params);
    fine.params = from_search_coords(space, std::move(fine.params));
    const auto& obs = bundle_observable_registry();
    bool within = true;
    for (const Anchor& a : anchors)
        within = within && std::abs(anchor_residual(a, obs.at(a.observable)(fitted))) <= 1.0;
    fine.converged = within;
    return CalibratedBundle{std::move(fitted), std::move(fine)};
}

} // namespace regenlink
