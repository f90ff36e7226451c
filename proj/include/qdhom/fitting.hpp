#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qdhom/correlations.hpp"
#include "qdhom/model.hpp"
#include "qdhom/units.hpp"

namespace qdhom {

struct Dataset {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma;  // empty when uncertainties are absent
    std::string label;

    bool has_sigma() const { return !sigma.empty(); }

    void validate(std::size_t min_points = 2) const {
        if (x.size() != y.size() || (!sigma.empty() && sigma.size() != x.size()))
            throw std::invalid_argument("Dataset: column lengths differ");
        if (x.size() < min_points)
            throw std::invalid_argument("Dataset: too few points for the fit");
        for (double s : sigma)
            if (!(s > 0.0)) throw std::invalid_argument("Dataset: sigma must be positive");
    }
};

struct FitResult {
    std::map<std::string, double> params;
    double residual = 0.0;  // chi-square
    int iterations = 0;
    bool converged = false;
    std::vector<std::pair<double, double>> model_curve;
    // central 68% bootstrap intervals, when requested
    std::map<std::string, std::pair<double, double>> intervals;
};

struct SimplexOptions {
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    double diameter_tol = 1e-9;
    int max_iterations = 5000;
    double initial_scale = 0.2;  // relative simplex size per coordinate
    std::vector<double> lower;   // optional box bounds, enforced by penalty
    std::vector<double> upper;
};

namespace detail {

inline double penalized(const std::function<double(const std::vector<double>&)>& f,
                        const std::vector<double>& x, const SimplexOptions& o) {
    double penalty = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!o.lower.empty() && x[i] < o.lower[i]) {
            const double v = o.lower[i] - x[i];
            penalty += 1e8 * (1.0 + v * v);
        }
        if (!o.upper.empty() && x[i] > o.upper[i]) {
            const double v = x[i] - o.upper[i];
            penalty += 1e8 * (1.0 + v * v);
        }
    }
    std::vector<double> xc = x;
    if (!o.lower.empty())
        for (std::size_t i = 0; i < xc.size(); ++i) xc[i] = std::max(xc[i], o.lower[i]);
    if (!o.upper.empty())
        for (std::size_t i = 0; i < xc.size(); ++i) xc[i] = std::min(xc[i], o.upper[i]);
    const double v = f(xc);
    if (std::isnan(v)) {
        std::string msg = "nelder_mead: objective returned NaN at (";
        for (std::size_t i = 0; i < xc.size(); ++i)
            msg += (i ? ", " : "") + std::to_string(xc[i]);
        throw std::runtime_error(msg + ")");
    }
    return v + penalty;
}

}  // namespace detail

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Standard Nelder-Mead simplex (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5); stops when the simplex diameter drops below tolerance.
inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<double>& x0,
                                 const SimplexOptions& opt = {}) {
    const std::size_t n = x0.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");

    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        double step = opt.initial_scale * std::abs(x0[i]);
        if (step == 0.0) step = opt.initial_scale;
        pts[i + 1][i] += step;
    }
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i <= n; ++i) vals[i] = detail::penalized(f, pts[i], opt);

    SimplexResult res;
    int iter = 0;
    for (; iter < opt.max_iterations; ++iter) {
        std::vector<std::size_t> order(n + 1);
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];

        double diameter = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                diameter = std::max(diameter, std::abs(pts[order[i]][k] - pts[best][k]));
        if (diameter < opt.diameter_tol) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / n;
        }

        auto blend = [&](double coeff) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k)
                p[k] = centroid[k] + coeff * (centroid[k] - pts[worst][k]);
            return p;
        };

        const std::vector<double> refl = blend(opt.reflection);
        const double f_refl = detail::penalized(f, refl, opt);
        if (f_refl < vals[best]) {
            const std::vector<double> exp_pt = blend(opt.expansion);
            const double f_exp = detail::penalized(f, exp_pt, opt);
            if (f_exp < f_refl) {
                pts[worst] = exp_pt;
                vals[worst] = f_exp;
            } else {
                pts[worst] = refl;
                vals[worst] = f_refl;
            }
        } else if (f_refl < vals[second]) {
            pts[worst] = refl;
            vals[worst] = f_refl;
        } else {
            const std::vector<double> con = blend(f_refl < vals[worst] ? opt.contraction
                                                                       : -opt.contraction);
            const double f_con = detail::penalized(f, con, opt);
            if (f_con < std::min(f_refl, vals[worst])) {
                pts[worst] = con;
                vals[worst] = f_con;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k)
                        pts[i][k] = pts[best][k] + opt.shrink * (pts[i][k] - pts[best][k]);
                    vals[i] = detail::penalized(f, pts[i], opt);
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (vals[i] < vals[best]) best = i;
    res.x = pts[best];
    if (!opt.lower.empty())
        for (std::size_t i = 0; i < n; ++i) res.x[i] = std::max(res.x[i], opt.lower[i]);
    if (!opt.upper.empty())
        for (std::size_t i = 0; i < n; ++i) res.x[i] = std::min(res.x[i], opt.upper[i]);
    res.value = vals[best];
    res.iterations = iter;
    return res;
}

namespace detail {

// Re-seed a fresh simplex at the found optimum until it stops improving;
// guards against premature collapse along narrow valleys. Deterministic.
inline SimplexResult nelder_mead_restarted(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x0, const SimplexOptions& opt = {}, int max_rounds = 3) {
    SimplexResult best = nelder_mead(f, x0, opt);
    for (int round = 1; round < max_rounds; ++round) {
        SimplexResult next = nelder_mead(f, best.x, opt);
        next.iterations += best.iterations;
        const bool improved = next.value < best.value * (1.0 - 1e-10);
        if (next.value < best.value) best = next;
        else best.iterations = next.iterations;
        if (!improved) break;
    }
    return best;
}

}  // namespace detail

// Inverse-variance weights when sigma is present, unweighted otherwise.
inline double chi_square(const Dataset& d, const std::function<double(double)>& model) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        const double r = d.y[i] - model(d.x[i]);
        const double w = d.has_sigma() ? 1.0 / (d.sigma[i] * d.sigma[i]) : 1.0;
        s += w * r * r;
    }
    return s;
}

// Purcell-calibrated decay rate: Gamma(Delta) = Gamma_B + R0 gw^2/(gw^2+Delta^2)
// with gw fixed to kappa/2 (both in meV on the detuning axis).
struct LifetimeModel {
    double gamma_b = 0.0;      // 1/ps
    double r0 = 0.0;           // 1/ps, on-resonance cavity contribution
    double gamma_w_mev = 0.0;  // fixed Lorentzian half width

    double decay_rate(double delta_mev) const {
        const double w2 = gamma_w_mev * gamma_w_mev;
        return gamma_b + r0 * w2 / (w2 + delta_mev * delta_mev);
    }
    double t1(double delta_mev) const { return 1.0 / decay_rate(delta_mev); }
    double purcell_factor() const { return r0 / gamma_b; }

    static LifetimeModel from_fit(const FitResult& f) {
        return {f.params.at("gamma_b"), f.params.at("r0"), f.params.at("gamma_w_mev")};
    }
    static LifetimeModel from_params(const SystemParams& p) {
        SystemParams q = p;
        q.delta_mev = 0.0;
        return {p.gamma_b, purcell_rate(q) - p.gamma_b, 0.5 * p.kappa_mev};
    }
};

// Lorentzian lifetime-vs-detuning fit with the width fixed to kappa/2.
inline FitResult fit_lifetime_lorentzian(const Dataset& data, double kappa_mev) {
    data.validate(4);
    const double gw = 0.5 * kappa_mev;

    const double t1_max = *std::max_element(data.y.begin(), data.y.end());
    const double t1_min = *std::min_element(data.y.begin(), data.y.end());
    const double gb0 = 0.8 / t1_max;
    const double r00 = std::max(1.0 / t1_min - gb0, 0.1 * gb0);

    SimplexOptions opt;
    opt.lower = {1e-9, 0.0};
    opt.upper = {1e3, 1e3};
    const auto objective = [&](const std::vector<double>& p) {
        const LifetimeModel m{p[0], p[1], gw};
        return chi_square(data, [&](double d) { return m.t1(d); });
    };
    const SimplexResult s = detail::nelder_mead_restarted(objective, {gb0, r00}, opt);

    FitResult r;
    r.params["gamma_b"] = s.x[0];
    r.params["r0"] = s.x[1];
    r.params["gamma_w_mev"] = gw;
    r.params["f_p"] = s.x[1] / s.x[0];
    r.params["t1_on_resonance_ps"] = 1.0 / (s.x[0] + s.x[1]);
    r.residual = s.value;
    r.iterations = s.iterations;
    r.converged = s.converged;
    const LifetimeModel m{s.x[0], s.x[1], gw};
    for (double d : data.x) r.model_curve.emplace_back(d, m.t1(d));
    return r;
}

// Single-parameter HOM dip fit 0.5 (1 - nu exp(-|tau|/T1)); tau in ps.
inline FitResult fit_hom_dip_simple(const Dataset& data, double t1_ps) {
    data.validate(2);
    if (!(t1_ps > 0.0)) throw std::invalid_argument("fit_hom_dip_simple: T1 must be > 0");

    SimplexOptions opt;
    opt.lower = {0.0};
    opt.upper = {1.0};
    const auto model = [&](double nu, double tau) {
        return 0.5 * (1.0 - nu * std::exp(-std::abs(tau) / t1_ps));
    };
    const auto objective = [&](const std::vector<double>& p) {
        return chi_square(data, [&](double tau) { return model(p[0], tau); });
    };
    const SimplexResult s = nelder_mead(objective, {0.5}, opt);

    FitResult r;
    r.params["nu"] = s.x[0];
    r.residual = s.value;
    r.iterations = s.iterations;
    r.converged = s.converged;
    for (double tau : data.x) r.model_curve.emplace_back(tau, model(s.x[0], tau));
    return r;
}

namespace detail {

inline double joint_chi_square(double alpha, double gamma_pd, const Dataset& dip,
                               const Dataset& vis, const LifetimeModel& lt) {
    const double gamma0 = lt.decay_rate(0.0);
    const EffectiveParams eff{gamma0, gamma_pd, alpha, 0.0};
    double chi = chi_square(dip, [&](double tau) { return g2_hom_analytic(tau, eff); });
    chi += chi_square(vis, [&](double delta) {
        return visibility({lt.decay_rate(delta), gamma_pd, alpha, delta});
    });
    return chi;
}

}  // namespace detail

// Simultaneous fit of the HOM dip (tau_D in ps, at resonance) and the
// dip depth vs detuning (Delta in meV), free (alpha, gamma_pd), with
// Gamma(Delta) calibrated by the lifetime fit.
inline FitResult fit_hom_joint(const Dataset& dip, const Dataset& vis,
                               const LifetimeModel& lt,
                               std::vector<double> x0 = {}) {
    dip.validate(2);
    vis.validate(1);

    SimplexOptions opt;
    opt.lower = {1e-5, 0.0};
    opt.upper = {1e3, 1e2};
    const auto objective = [&](const std::vector<double>& p) {
        return detail::joint_chi_square(p[0], p[1], dip, vis, lt);
    };

    // The (alpha, gamma) surface has a long jitter/dephasing trade-off valley;
    // run a small deterministic multi-start and keep the best optimum.
    std::vector<std::vector<double>> starts;
    if (!x0.empty()) starts.push_back(x0);
    else {
        for (double ta : {3.0, 10.0, 25.0})
            for (double g_uev : {0.3, 1.0, 3.0})
                starts.push_back({1.0 / ta, energy_to_rate(uev_to_mev(g_uev))});
    }
    SimplexResult s = detail::nelder_mead_restarted(objective, starts.front(), opt);
    for (std::size_t i = 1; i < starts.size(); ++i) {
        const SimplexResult cand = detail::nelder_mead_restarted(objective, starts[i], opt);
        if (cand.value < s.value) s = cand;
    }

    FitResult r;
    r.params["alpha"] = s.x[0];
    r.params["gamma_pd"] = s.x[1];
    r.params["t_alpha_ps"] = 1.0 / s.x[0];
    r.params["gamma_uev"] = mev_to_uev(rate_to_energy(s.x[1]));
    r.residual = s.value;
    r.iterations = s.iterations;
    r.converged = s.converged;
    const EffectiveParams eff{lt.decay_rate(0.0), s.x[1], s.x[0], 0.0};
    for (double tau : dip.x) r.model_curve.emplace_back(tau, g2_hom_analytic(tau, eff));
    return r;
}

// Dip-only fit in the time-jitter regime (gamma fixed to zero, alpha free).
// Demonstrates the dip-shape degeneracy against the joint fit.
inline FitResult fit_hom_dip_jitter(const Dataset& dip, const LifetimeModel& lt,
                                    double alpha0 = 1.0 / 20.0) {
    dip.validate(2);
    const Dataset empty_vis{};
    SimplexOptions opt;
    opt.lower = {1e-5};
    opt.upper = {1e3};
    const auto objective = [&](const std::vector<double>& p) {
        return detail::joint_chi_square(p[0], 0.0, dip, empty_vis, lt);
    };
    const SimplexResult s = detail::nelder_mead_restarted(objective, {alpha0}, opt);

    FitResult r;
    r.params["alpha"] = s.x[0];
    r.params["gamma_pd"] = 0.0;
    r.params["t_alpha_ps"] = 1.0 / s.x[0];
    r.params["gamma_uev"] = 0.0;
    r.residual = s.value;
    r.iterations = s.iterations;
    r.converged = s.converged;
    const EffectiveParams eff{lt.decay_rate(0.0), 0.0, s.x[0], 0.0};
    for (double tau : dip.x) r.model_curve.emplace_back(tau, g2_hom_analytic(tau, eff));
    return r;
}

// Gaussian Michelson contrast fit A + B exp[-(pi/2)(tau/T2)^2].
inline FitResult fit_michelson(const Dataset& data) {
    data.validate(4);
    const double ymin = *std::min_element(data.y.begin(), data.y.end());
    const double ymax = *std::max_element(data.y.begin(), data.y.end());
    const double xspan = *std::max_element(data.x.begin(), data.x.end()) -
                         *std::min_element(data.x.begin(), data.x.end());

    SimplexOptions opt;
    opt.lower = {-1.0, 0.0, 1e-3};
    opt.upper = {2.0, 2.0, 1e6};
    const auto objective = [&](const std::vector<double>& p) {
        return chi_square(data,
                          [&](double tau) { return michelson_contrast(tau, p[0], p[1], p[2]); });
    };
    const SimplexResult s =
        detail::nelder_mead_restarted(objective,
                                      {ymin, std::max(ymax - ymin, 0.1), 0.5 * xspan}, opt);

    FitResult r;
    r.params["a"] = s.x[0];
    r.params["b"] = s.x[1];
    r.params["t2_ps"] = s.x[2];
    r.residual = s.value;
    r.iterations = s.iterations;
    r.converged = s.converged;
    for (double tau : data.x)
        r.model_curve.emplace_back(tau, michelson_contrast(tau, s.x[0], s.x[1], s.x[2]));
    return r;
}

// Residual bootstrap: resample residuals around the fitted curve, refit, and
// report central 68% intervals. The refit callable receives the synthetic
// dataset and must return the same parameter names as `base`.
inline void add_bootstrap_intervals(FitResult& base, const Dataset& data,
                                    const std::function<FitResult(const Dataset&)>& refit,
                                    int replicates = 200, std::uint64_t seed = 42) {
    if (base.model_curve.size() != data.x.size())
        throw std::invalid_argument("add_bootstrap_intervals: curve/data size mismatch");
    std::vector<double> residuals(data.x.size());
    for (std::size_t i = 0; i < data.x.size(); ++i)
        residuals[i] = data.y[i] - base.model_curve[i].second;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, residuals.size() - 1);

    std::map<std::string, std::vector<double>> samples;
    for (int b = 0; b < replicates; ++b) {
        Dataset d = data;
        for (std::size_t i = 0; i < d.y.size(); ++i)
            d.y[i] = base.model_curve[i].second + residuals[pick(rng)];
        FitResult f = refit(d);
        for (const auto& [k, v] : f.params) samples[k].push_back(v);
    }
    for (auto& [k, v] : samples) {
        std::sort(v.begin(), v.end());
        const auto pct = [&](double q) {
            const double pos = q * (v.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const double frac = pos - lo;
            return lo + 1 < v.size() ? v[lo] * (1.0 - frac) + v[lo + 1] * frac : v[lo];
        };
        base.intervals[k] = {pct(0.16), pct(0.84)};
    }
}

}  // namespace qdhom
