#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "qdhom/linalg.hpp"
#include "qdhom/phonon.hpp"
#include "qdhom/units.hpp"

namespace qdhom {

// Single-excitation basis. |e,1> and |p,1> are unreachable from |p,0>
// under the excitation-conserving Hamiltonian and downward jumps, so
// dimension 4 is exact.
namespace basis {
inline constexpr int dim = 4;
inline constexpr int pump0 = 0;     // |p,0>  (= |P> of the eliminated model)
inline constexpr int exciton0 = 1;  // |e,0>  (= |E>)
inline constexpr int ground1 = 2;   // |g,1>  (= |G>)
inline constexpr int ground0 = 3;   // |g,0>
}  // namespace basis

enum class EmissionChannel { qd, cavity };

struct SystemParams {
    double g_mev = 0.034;        // QD-cavity coupling
    double kappa_mev = 0.42;     // cavity decay
    double gamma_b = 1.0 / 730;  // background decay, 1/ps
    double gamma_pd = 0.0;       // pure dephasing, 1/ps
    double alpha = 1.0 / 3.2;    // pump relaxation, 1/ps
    double delta_mev = 0.0;      // detuning (signed input; no T -> sign mapping)
    double temperature_k = 17.5;
    EmissionChannel channel = EmissionChannel::cavity;
    std::optional<PhononParams> phonon;
    // Default uses Gamma_B inside gamma_tot; the self-consistent variant
    // feeds the Purcell rate back in. They differ by roughly
    // (Gamma - Gamma_B)/(kappa + Gamma_B), about 2% at default parameters.
    bool gamma_tot_uses_purcell = false;

    void validate() const {
        if (!(g_mev > 0.0)) throw std::invalid_argument("SystemParams: g must be > 0");
        if (!(kappa_mev > 0.0)) throw std::invalid_argument("SystemParams: kappa must be > 0");
        if (!(gamma_b > 0.0)) throw std::invalid_argument("SystemParams: gamma_b must be > 0");
        if (!(alpha > 0.0)) throw std::invalid_argument("SystemParams: alpha must be > 0");
        if (gamma_pd < 0.0) throw std::invalid_argument("SystemParams: gamma_pd must be >= 0");
        if (temperature_k < 0.0) throw std::invalid_argument("SystemParams: negative temperature");
        if (phonon) phonon->validate();
    }
};

struct EffectiveParams {
    double gamma;      // Purcell-enhanced decay, 1/ps
    double gamma_pd;   // 1/ps
    double alpha;      // 1/ps
    double delta_mev;
};

namespace detail {
inline double gamma_tot_with(const SystemParams& p, double decay_rate) {
    return p.gamma_pd + 0.5 * (energy_to_rate(p.kappa_mev) + decay_rate);
}
inline double purcell_with(const SystemParams& p, double gtot) {
    const double g_r = energy_to_rate(p.g_mev);
    const double d_r = energy_to_rate(p.delta_mev);
    return p.gamma_b + 2.0 * g_r * g_r * gtot / (gtot * gtot + d_r * d_r);
}
}  // namespace detail

inline double gamma_tot(const SystemParams& p) {
    double gt = detail::gamma_tot_with(p, p.gamma_b);
    if (p.gamma_tot_uses_purcell) {
        for (int i = 0; i < 50; ++i)  // fixed point, converges in a few steps
            gt = detail::gamma_tot_with(p, detail::purcell_with(p, gt));
    }
    if (!(gt > 0.0)) throw std::invalid_argument("gamma_tot must be positive");
    return gt;
}

// Eq.-(2)-style Purcell-enhanced decay rate, all quantities as rates.
inline double purcell_rate(const SystemParams& p) {
    return detail::purcell_with(p, gamma_tot(p));
}

// F_P = Gamma(Delta=0)/Gamma_B - 1 (the far-detuned limit of the rate is Gamma_B).
inline double purcell_factor(const SystemParams& p) {
    SystemParams q = p;
    q.delta_mev = 0.0;
    return purcell_rate(q) / p.gamma_b - 1.0;
}

inline EffectiveParams adiabatic_eliminated_params(const SystemParams& p) {
    return {purcell_rate(p), p.gamma_pd, p.alpha, p.delta_mev};
}

// gamma_tot / max(|Delta|, Gamma, g), all as rates. Callers warn below a
// threshold (default 3); capped at a sentinel when the denominator vanishes.
inline double validity_ratio(const SystemParams& p) {
    const double denom = std::max({std::abs(energy_to_rate(p.delta_mev)),
                                   purcell_rate(p), energy_to_rate(p.g_mev)});
    constexpr double sentinel = 1e12;
    if (denom <= 0.0) return sentinel;
    return std::min(sentinel, gamma_tot(p) / denom);
}

inline constexpr double kDefaultValidityThreshold = 3.0;

// H = Delta |e,0><e,0| + g(|e,0><g,1| + h.c.), in meV. Pump-level diagonal
// fixed to zero (no coherences with |p,0> are ever created from the
// diagonal initial state, so the choice is testably irrelevant).
inline ComplexMatrix build_jc_hamiltonian(const SystemParams& p) {
    ComplexMatrix h(basis::dim);
    h(basis::exciton0, basis::exciton0) = p.delta_mev;
    h(basis::exciton0, basis::ground1) = p.g_mev;
    h(basis::ground1, basis::exciton0) = p.g_mev;
    return h;
}

inline ComplexMatrix initial_state() {
    return ComplexMatrix::ket_bra(basis::dim, basis::pump0, basis::pump0);
}

// Emission operator selected by channel: sigma = |g,0><e,0| for QD emission,
// c = |g,0><g,1| for cavity emission.
inline ComplexMatrix emission_operator(EmissionChannel ch) {
    if (ch == EmissionChannel::qd)
        return ComplexMatrix::ket_bra(basis::dim, basis::ground0, basis::exciton0);
    return ComplexMatrix::ket_bra(basis::dim, basis::ground0, basis::ground1);
}

// Eliminated-model emission operator sigma = |G><E|.
inline ComplexMatrix eliminated_emission_operator() {
    return ComplexMatrix::ket_bra(basis::dim, basis::ground1, basis::exciton0);
}

namespace detail {
inline Superoperator lindblad_term(const ComplexMatrix& a, double rate) {
    const int d = a.dim();
    ComplexMatrix ada = a.adjoint() * a;
    Superoperator s = Superoperator::sandwich(a, a.adjoint());
    s -= 0.5 * Superoperator::left_mult(ada);
    s -= 0.5 * Superoperator::right_mult(ada);
    return cplx(rate, 0.0) * s;
}

inline Superoperator hamiltonian_term(const ComplexMatrix& h_mev) {
    // -(i/hbar) [H, rho]
    Superoperator s = Superoperator::left_mult(h_mev);
    s -= Superoperator::right_mult(h_mev);
    return cplx(0.0, -1.0 / constants::hbar_mev_ps) * s;
}
}  // namespace detail

inline Superoperator build_phonon_dissipator(const SystemParams& p) {
    p.validate();
    if (!p.phonon)
        throw std::invalid_argument("build_phonon_dissipator: no phonon params present");
    PhononParams ph = *p.phonon;
    ph.temperature_k = p.temperature_k;  // system temperature is authoritative
    const ComplexMatrix proj =
        ComplexMatrix::ket_bra(basis::dim, basis::exciton0, basis::exciton0);
    return build_phonon_dissipator(build_jc_hamiltonian(p), proj, ph);
}

// Full 4-state generator: -(i/hbar)[H_JC, .] + L_kappa(c) + L_GammaB(|g,0><e,0|)
// + L_2gamma(|e,0><e,0|) + L_alpha(|e,0><p,0|) + extra.
inline Superoperator build_lindblad_generator(const SystemParams& p,
                                              const Superoperator* extra = nullptr) {
    p.validate();
    using namespace basis;
    Superoperator l = detail::hamiltonian_term(build_jc_hamiltonian(p));
    l += detail::lindblad_term(ComplexMatrix::ket_bra(dim, ground0, ground1),
                               energy_to_rate(p.kappa_mev));
    l += detail::lindblad_term(ComplexMatrix::ket_bra(dim, ground0, exciton0), p.gamma_b);
    l += detail::lindblad_term(ComplexMatrix::ket_bra(dim, exciton0, exciton0),
                               2.0 * p.gamma_pd);
    l += detail::lindblad_term(ComplexMatrix::ket_bra(dim, exciton0, pump0), p.alpha);
    if (extra) {
        if (extra->hilbert_dim() != dim)
            throw std::invalid_argument("build_lindblad_generator: extra dimension mismatch");
        l += *extra;
    }
    return l;
}

// Convenience: full generator including the phonon dissipator when enabled.
inline Superoperator build_full_generator(const SystemParams& p) {
    if (p.phonon && p.phonon->eta_mev2 > 0.0) {
        Superoperator k = build_phonon_dissipator(p);
        return build_lindblad_generator(p, &k);
    }
    return build_lindblad_generator(p);
}

// Adiabatically eliminated three-level generator, embedded in the same
// 4-state space: -(i/hbar)[Delta |E><E|, .] + L_Gamma(|G><E|) +
// L_2gamma(|E><E|) + L_alpha(|E><P|).
inline Superoperator build_eliminated_generator(const EffectiveParams& eff) {
    using namespace basis;
    ComplexMatrix h(dim);
    h(exciton0, exciton0) = eff.delta_mev;
    Superoperator l = detail::hamiltonian_term(h);
    l += detail::lindblad_term(ComplexMatrix::ket_bra(dim, ground1, exciton0), eff.gamma);
    l += detail::lindblad_term(ComplexMatrix::ket_bra(dim, exciton0, exciton0),
                               2.0 * eff.gamma_pd);
    l += detail::lindblad_term(ComplexMatrix::ket_bra(dim, exciton0, pump0), eff.alpha);
    return l;
}

}  // namespace qdhom
