#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qdhom/dynamics.hpp"
#include "qdhom/model.hpp"
#include "qdhom/units.hpp"

namespace qdhom {

// Theta(t) * alpha/(Gamma-alpha) * (e^{-alpha t} - e^{-Gamma t}), with the
// degenerate Gamma = alpha limit alpha t e^{-alpha t}.
inline double excited_population_analytic(double t_ps, double alpha, double gamma) {
    if (!(alpha > 0.0) || !(gamma > 0.0))
        throw std::invalid_argument("excited_population_analytic: rates must be positive");
    if (t_ps < 0.0) return 0.0;
    if (std::abs(gamma - alpha) < 1e-9 * gamma)
        return alpha * t_ps * std::exp(-alpha * t_ps);
    return alpha / (gamma - alpha) * (std::exp(-alpha * t_ps) - std::exp(-gamma * t_ps));
}

// G1(t, t+tau) = pop(t) * e^{-(gamma_pd + Gamma/2 + i Delta/hbar)|tau|}.
inline cplx g1_analytic(double t_ps, double tau_ps, const EffectiveParams& eff) {
    const double pop = excited_population_analytic(t_ps, eff.alpha, eff.gamma);
    const double at = std::abs(tau_ps);
    const double decay = (eff.gamma_pd + 0.5 * eff.gamma) * at;
    const double phase = energy_to_rate(eff.delta_mev) * at;
    return pop * std::exp(-decay) * cplx(std::cos(phase), -std::sin(phase));
}

// nu = (Gamma/(Gamma+2 gamma)) * (alpha/(Gamma+alpha))
inline double visibility(const EffectiveParams& eff) {
    if (!(eff.gamma > 0.0) || !(eff.alpha > 0.0) || eff.gamma_pd < 0.0)
        throw std::invalid_argument("visibility: invalid rates");
    return (eff.gamma / (eff.gamma + 2.0 * eff.gamma_pd)) *
           (eff.alpha / (eff.gamma + eff.alpha));
}

// 1/2 (1 - nu/(Gamma-alpha) [Gamma e^{-|tau|alpha} - alpha e^{-|tau|Gamma}]),
// degenerate limit 1/2 (1 - nu (1 + Gamma|tau|) e^{-Gamma|tau|}).
inline double g2_hom_analytic(double tau_d_ps, const EffectiveParams& eff) {
    const double nu = visibility(eff);
    const double at = std::abs(tau_d_ps);
    double bracket;
    if (std::abs(eff.gamma - eff.alpha) < 1e-9 * eff.gamma) {
        bracket = (1.0 + eff.gamma * at) * std::exp(-eff.gamma * at);
    } else {
        bracket = (eff.gamma * std::exp(-at * eff.alpha) -
                   eff.alpha * std::exp(-at * eff.gamma)) /
                  (eff.gamma - eff.alpha);
    }
    return 0.5 * (1.0 - nu * bracket);
}

// 1/T2 = 1/(2 T1) + gamma
inline double coherence_time(double t1_ps, double gamma_pd) {
    if (!(t1_ps > 0.0) || gamma_pd < 0.0)
        throw std::invalid_argument("coherence_time: invalid arguments");
    return 1.0 / (0.5 / t1_ps + gamma_pd);
}

// Michelson contrast fit model A + B exp[-(pi/2)(tau/T2)^2].
inline double michelson_contrast(double tau_ps, double a, double b, double t2_ps) {
    if (!(t2_ps > 0.0)) throw std::invalid_argument("michelson_contrast: T2 must be > 0");
    const double x = tau_ps / t2_ps;
    return a + b * std::exp(-0.5 * 3.14159265358979323846 * x * x);
}

// Subtract half the measured g2(0); values floored at zero with the clamp
// count reported.
inline std::vector<double> background_correct(const std::vector<double>& raw, double g2zero,
                                              int* clamped = nullptr) {
    if (g2zero < 0.0 || g2zero > 1.0)
        throw std::invalid_argument("background_correct: g2zero must lie in [0, 1]");
    std::vector<double> out;
    out.reserve(raw.size());
    int n_clamped = 0;
    for (double v : raw) {
        double c = v - 0.5 * g2zero;
        if (c < 0.0) {
            c = 0.0;
            ++n_clamped;
        }
        out.push_back(c);
    }
    if (clamped) *clamped = n_clamped;
    return out;
}

struct CoalescenceResult {
    double c = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
    double tau_d_used_ps = 0.0;  // delay after snapping to the quadrature grid
};

inline double g2_hom_numeric(double coalescence, double g2zero) {
    if (g2zero < 0.0 || g2zero > 1.0)
        throw std::invalid_argument("g2_hom_numeric: g2zero must lie in [0, 1]");
    return 0.5 * g2zero + 0.5 * (1.0 - coalescence);
}

inline double g2_hom_numeric(const CoalescenceResult& c, double g2zero) {
    return g2_hom_numeric(c.c, g2zero);
}

enum class HomMethod { analytic, numeric };

struct HomCurve {
    std::vector<double> tau_d_ps;
    std::vector<double> g2hom;
    double visibility = 0.0;
    HomMethod method = HomMethod::analytic;
};

// 41 delays over +-5 max(T1, 1/alpha) unless overridden.
inline std::vector<double> default_hom_delays(const EffectiveParams& eff, int n = 41) {
    const double span = 5.0 * std::max(1.0 / eff.gamma, 1.0 / eff.alpha);
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = -span + 2.0 * span * i / (n - 1);
    return d;
}

inline HomCurve hom_curve_analytic(const EffectiveParams& eff,
                                   const std::vector<double>& delays_ps) {
    HomCurve c;
    c.method = HomMethod::analytic;
    c.visibility = visibility(eff);
    c.tau_d_ps = delays_ps;
    c.g2hom.reserve(delays_ps.size());
    for (double t : delays_ps) c.g2hom.push_back(g2_hom_analytic(t, eff));
    return c;
}

// ---------------------------------------------------------------------------
// Numeric pipeline: quantum-regression G1 grid plus the two-time coalescence
// quadrature of the HOM measurement.
// ---------------------------------------------------------------------------

struct NumericOptions {
    double t_max_factor = 12.0;  // population decays below 1e-5 of peak
    int scale_points = 24;       // grid points per smallest relevant timescale
    int min_nt = 2400;           // keeps the pump-rise trapezoid bias small
    int min_ntau = 64;
    double conv_tol = 1e-3;      // fine-vs-coarse quadrature agreement
    std::size_t max_grid_entries = 24'000'000;
};

struct G1Numeric {
    CorrelationGrid grid;
    double pop_integral = 0.0;         // trapezoid of the tau=0 column
    double pop_integral_coarse = 0.0;  // stride-2 estimate for convergence checks
};

namespace detail {

struct GridScales {
    double t_scale;    // fastest structure along t
    double tau_scale;  // fastest structure along tau
    double t_max;
    double s_max;
};

// Grid steps resolve the population/coherence envelopes only. The detuning
// phase e^{-i Delta s / hbar} cancels exactly inside the coalescence products
// G(t - tau_D, s) conj(G(t, s)), and grid samples themselves are exact
// (one-step matrix exponentials), so oscillations need no extra resolution.
inline GridScales scales_eliminated(const EffectiveParams& eff) {
    GridScales s;
    s.t_scale = std::min(1.0 / eff.alpha, 1.0 / eff.gamma);
    // The coalescence integrand decays like |G|^2, at twice the coherence
    // rate; sizing hs on that keeps the stride-2 convergence check inside
    // conv_tol with margin.
    s.tau_scale = 1.0 / (2.0 * eff.gamma_pd + eff.gamma);
    s.t_max = 12.0 * std::max(1.0 / eff.gamma, 1.0 / eff.alpha);
    s.s_max = 12.0 / (2.0 * eff.gamma_pd + eff.gamma);
    return s;
}

inline GridScales scales_full(const SystemParams& p) {
    const EffectiveParams eff = adiabatic_eliminated_params(p);
    GridScales s = scales_eliminated(eff);
    // Along t the pump rise occupies only ~1/alpha of the 1/Gamma-long window,
    // so its trapezoid error is diluted; a step of (1/alpha)/2 suffices. The
    // Rabi beat (period 2 pi hbar / sqrt(Delta^2 + 4g^2), O((g/gtot)^2)
    // amplitude) must stay resolved too, since it does not cancel along t.
    const double e_osc = std::hypot(p.delta_mev, 2.0 * p.g_mev);
    const double t_osc = 2.0 * 3.14159265358979323846 * constants::hbar_mev_ps / e_osc;
    s.t_scale = std::min({1.0 / eff.gamma, 8.0 / eff.alpha, 2.0 * t_osc});
    // Phonon scattering between the dressed states speeds up the coherence
    // decay; fold the TCL2 emission + absorption rate into the tau step.
    if (p.phonon && p.phonon->eta_mev2 > 0.0) {
        const double r_ph = (half_fourier_rate(e_osc, *p.phonon).real() +
                             half_fourier_rate(-e_osc, *p.phonon).real());
        s.tau_scale = 1.0 / (2.0 * eff.gamma_pd + eff.gamma + 2.0 * r_ph);
    }
    return s;
}

// Odd node counts so a stride-2 subgrid is itself a valid trapezoid rule.
inline int odd_node_count(double span, double step_hint, int minimum) {
    int intervals = static_cast<int>(std::ceil(span / step_hint));
    intervals = std::max(intervals, minimum);
    if (intervals % 2 != 0) ++intervals;
    return intervals + 1;
}

inline G1Numeric build_g1(const Superoperator& l, const ComplexMatrix& sigma,
                          const ComplexMatrix& rho0, const GridScales& sc,
                          const NumericOptions& opt) {
    GridScales s = sc;
    s.t_max *= opt.t_max_factor / 12.0;
    s.s_max *= opt.t_max_factor / 12.0;

    const double ht_hint = s.t_scale / opt.scale_points;
    const double hs_hint = s.tau_scale / opt.scale_points;
    const int nt = odd_node_count(s.t_max, ht_hint, opt.min_nt);
    const int ntau = odd_node_count(s.s_max, hs_hint, opt.min_ntau);
    if (static_cast<std::size_t>(nt) * ntau > opt.max_grid_entries)
        throw std::runtime_error("numeric pipeline: correlation grid too large; "
                                 "relax NumericOptions or the parameter scales");

    const TimeGrid t_grid(0.0, s.t_max / (nt - 1), nt);
    const TimeGrid tau_grid(0.0, s.s_max / (ntau - 1), ntau);

    const Trajectory traj = evolve_exact(l, rho0, t_grid);
    G1Numeric out;
    out.grid = g1_regression(l, sigma, traj, tau_grid);

    const double ht = t_grid.dt;
    for (int i = 0; i < nt; ++i) {
        const double w = (i == 0 || i == nt - 1) ? 0.5 : 1.0;
        out.pop_integral += w * ht * out.grid.at(i, 0).real();
    }
    for (int i = 0; i < nt; i += 2) {
        const double w = (i == 0 || i == nt - 1) ? 0.5 : 1.0;
        out.pop_integral_coarse += w * 2.0 * ht * out.grid.at(i, 0).real();
    }
    return out;
}

}  // namespace detail

inline G1Numeric build_g1_eliminated(const EffectiveParams& eff,
                                     const NumericOptions& opt = {}) {
    return detail::build_g1(build_eliminated_generator(eff), eliminated_emission_operator(),
                            initial_state(), detail::scales_eliminated(eff), opt);
}

inline G1Numeric build_g1_full(const SystemParams& p, const NumericOptions& opt = {}) {
    return detail::build_g1(build_full_generator(p), emission_operator(p.channel),
                            initial_state(), detail::scales_full(p), opt);
}

// C(tau_D) = int int Re[G1(t1-tau_D, t2-tau_D) G1(t2, t1)] / (int pop)^2,
// evaluated after the change of variables (t1, t2) -> (t, s = t2 - t1):
// the numerator becomes 2 int_{s>=0} int_t Re[G(t - tau_D, s) conj(G(t, s))],
// which is a direct sum over the regression grid once tau_D is snapped to
// the t-grid. A stride-2 coarse estimate guards against under-resolution.
inline CoalescenceResult coalescence_numeric(const G1Numeric& g1, double tau_d_ps,
                                             const NumericOptions& opt = {}) {
    const CorrelationGrid& g = g1.grid;
    const int nt = g.t.n;
    const int ntau = g.tau.n;
    const double ht = g.t.dt;
    const double hs = g.tau.dt;

    // Snap to an even multiple of the t spacing so the coarse sum shares nodes.
    int k = static_cast<int>(std::llround(std::abs(tau_d_ps) / ht / 2.0)) * 2;

    double num_fine = 0.0, num_coarse = 0.0;
    for (int j = 0; j < ntau; ++j) {
        const double wj = (j == 0 || j == ntau - 1) ? 0.5 : 1.0;
        const cplx* row = g.values.data() + static_cast<std::size_t>(0);
        double sf = 0.0, sc = 0.0;
        for (int i = k; i < nt; ++i) {
            const double wi = (i == k || i == nt - 1) ? 0.5 : 1.0;
            const cplx a = row[static_cast<std::size_t>(i - k) * ntau + j];
            const cplx b = row[static_cast<std::size_t>(i) * ntau + j];
            const double re = a.real() * b.real() + a.imag() * b.imag();  // Re[a conj(b)]
            sf += wi * re;
            if ((j % 2 == 0) && (i % 2 == 0) && (i - k) % 2 == 0)
                sc += ((i == k || i == nt - 1) ? 0.5 : 1.0) * re;
        }
        num_fine += wj * sf;
        if (j % 2 == 0) num_coarse += ((j == 0 || j == ntau - 1) ? 0.5 : 1.0) * sc;
    }
    num_fine *= 2.0 * ht * hs;
    num_coarse *= 2.0 * (2.0 * ht) * (2.0 * hs);

    const double den_fine = g1.pop_integral * g1.pop_integral;
    const double den_coarse = g1.pop_integral_coarse * g1.pop_integral_coarse;
    if (!(den_fine > 0.0))
        throw std::runtime_error("coalescence_numeric: vanishing population integral");

    const double c_fine = num_fine / den_fine;
    const double c_coarse = num_coarse / den_coarse;
    if (std::abs(c_fine - c_coarse) > opt.conv_tol)
        throw std::runtime_error(
            "coalescence_numeric: quadrature not converged; refine the grid "
            "(increase scale_points or min_nt)");

    CoalescenceResult r;
    r.numerator = num_fine;
    r.denominator = den_fine;
    r.c = std::clamp(c_fine, 0.0, 1.0);
    if (c_fine < -1e-4 || c_fine > 1.0 + 1e-4)
        throw std::runtime_error("coalescence_numeric: C outside [0,1] beyond tolerance");
    r.tau_d_used_ps = k * ht * (tau_d_ps < 0.0 ? -1.0 : 1.0);
    return r;
}

inline HomCurve hom_curve_numeric(const G1Numeric& g1, const std::vector<double>& delays_ps,
                                  double g2zero = 0.0, const NumericOptions& opt = {}) {
    HomCurve c;
    c.method = HomMethod::numeric;
    c.tau_d_ps.reserve(delays_ps.size());
    c.g2hom.reserve(delays_ps.size());
    for (double t : delays_ps) {
        const CoalescenceResult r = coalescence_numeric(g1, t, opt);
        c.tau_d_ps.push_back(r.tau_d_used_ps);
        c.g2hom.push_back(g2_hom_numeric(r, g2zero));
    }
    c.visibility = coalescence_numeric(g1, 0.0, opt).c;
    return c;
}

inline double numeric_visibility(const SystemParams& p, const NumericOptions& opt = {}) {
    return coalescence_numeric(build_g1_full(p, opt), 0.0, opt).c;
}

// The constant pure-dephasing rate that reproduces the phonon model's numeric
// visibility when the phonon dissipator is replaced by extra dephasing.
// Differential by construction: both sides of the bisection use the same
// numeric pipeline, so quadrature bias cancels and eta = 0 returns gamma_pd.
inline double effective_dephasing_equivalent(const SystemParams& p,
                                             const NumericOptions& opt = {}) {
    p.validate();
    if (!p.phonon)
        throw std::invalid_argument("effective_dephasing_equivalent: phonon params required");
    if (validity_ratio(p) < kDefaultValidityThreshold)
        throw std::invalid_argument(
            "effective_dephasing_equivalent: validity_ratio below threshold");

    const double nu_target = numeric_visibility(p, opt);

    SystemParams q = p;
    q.phonon.reset();
    const auto nu_of = [&](double gamma_pd) {
        SystemParams r = q;
        r.gamma_pd = gamma_pd;
        return numeric_visibility(r, opt);
    };

    double lo = 0.0;
    double hi = 10.0 * energy_to_rate(p.kappa_mev);
    double f_lo = nu_of(lo) - nu_target;
    double f_hi = nu_of(hi) - nu_target;
    if (f_lo < 0.0 || f_hi > 0.0)
        throw std::runtime_error(
            "effective_dephasing_equivalent: target visibility outside the "
            "eliminated-model range (no bracketing)");
    if (f_lo == 0.0) return lo;

    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = nu_of(mid) - nu_target;
        if (f_mid >= 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-6 * std::max(1e-12, 0.5 * (lo + hi))) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace qdhom
