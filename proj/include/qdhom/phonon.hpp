#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

#include "qdhom/linalg.hpp"
#include "qdhom/units.hpp"

namespace qdhom {

// Super-ohmic exciton-phonon environment, treated to second order
// (time-convolutionless) around the QD-cavity eigenbasis.
struct PhononParams {
    double eta_mev2 = 0.032;      // coupling strength, meV^-2
    double omega_c_mev = 1.3;     // cutoff, meV
    double temperature_k = 4.2;   // mirrored from SystemParams when wired up
    bool include_lamb_shift = false;
    double s_max_ps = 0.0;        // 0 -> derived as 20/omega_c-equivalent time
    int quad_points = 4000;

    void validate() const {
        if (eta_mev2 < 0.0) throw std::invalid_argument("PhononParams: eta must be >= 0");
        if (omega_c_mev <= 0.0) throw std::invalid_argument("PhononParams: omega_c must be > 0");
        if (temperature_k < 0.0) throw std::invalid_argument("PhononParams: negative temperature");
        if (quad_points < 16) throw std::invalid_argument("PhononParams: quad_points too small");
    }
};

// J(omega) = eta * omega^3 * exp(-(omega/omega_c)^2), omega in meV.
inline double spectral_density(double omega_mev, const PhononParams& p) {
    if (omega_mev < 0.0)
        throw std::domain_error("spectral_density: omega must be non-negative");
    const double x = omega_mev / p.omega_c_mev;
    return p.eta_mev2 * omega_mev * omega_mev * omega_mev * std::exp(-x * x);
}

namespace detail {

// J(w) * n(w) with the w -> 0 limit folded in (goes to zero quadratically).
inline double j_times_n(double omega_mev, const PhononParams& p) {
    if (omega_mev <= 0.0) return 0.0;
    if (p.temperature_k == 0.0) return 0.0;
    return spectral_density(omega_mev, p) * thermal_occupation(omega_mev, p.temperature_k);
}

inline double j_times_n_plus_1(double omega_mev, const PhononParams& p) {
    if (omega_mev <= 0.0) return 0.0;
    double n = (p.temperature_k == 0.0) ? 0.0
                                        : thermal_occupation(omega_mev, p.temperature_k);
    return spectral_density(omega_mev, p) * (n + 1.0);
}

// Principal value of integral_0^L f(w') / (w0 - w') dw' by singularity
// subtraction on a midpoint grid.
template <typename F>
double principal_value(F f, double w0, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double sum = 0.0;
    const bool inside = (w0 > lo && w0 < hi);
    const double f0 = inside ? f(w0) : 0.0;
    for (int k = 0; k < n; ++k) {
        const double w = lo + (k + 0.5) * h;
        const double denom = w0 - w;
        if (inside) {
            if (std::abs(denom) < 1e-12 * (hi - lo)) continue;  // removable point
            sum += (f(w) - f0) / denom * h;
        } else {
            sum += f(w) / denom * h;
        }
    }
    if (inside) sum += f0 * std::log(std::abs((w0 - lo) / (hi - w0)));
    return sum;
}

}  // namespace detail

// One-sided Fourier transform of the thermal phonon correlation function,
// evaluated at a signed Bohr frequency (passed as an energy, meV).
// Real part: pi*J(|w|)*(n+1)/hbar for w>0 (phonon emission),
//            pi*J(|w|)*n/hbar for w<0 (absorption), 0 at w=0.
// Imaginary part (Lamb-type shift): principal-value quadrature over
// [0, 8*omega_c], or 0 when the flag is off.
inline cplx half_fourier_rate(double omega_mev, const PhononParams& p) {
    p.validate();
    const double pi = 3.14159265358979323846;
    double re = 0.0;
    if (omega_mev > 0.0) {
        re = pi * detail::j_times_n_plus_1(omega_mev, p) / constants::hbar_mev_ps;
    } else if (omega_mev < 0.0) {
        re = pi * detail::j_times_n(-omega_mev, p) / constants::hbar_mev_ps;
    }
    double im = 0.0;
    if (p.include_lamb_shift && p.eta_mev2 > 0.0) {
        const double hi = 8.0 * p.omega_c_mev;
        const auto em = [&](double w) { return detail::j_times_n_plus_1(w, p); };
        const auto ab = [&](double w) { return detail::j_times_n(w, p); };
        im += detail::principal_value(em, omega_mev, 0.0, hi, p.quad_points);
        // 1/(w + w') term is regular for w >= 0 but becomes a PV for w < 0.
        im -= detail::principal_value(ab, -omega_mev, 0.0, hi, p.quad_points);
        im /= constants::hbar_mev_ps;
    }
    return {re, im};
}

// TCL2 dissipator in the QD-cavity eigenbasis. `h_mev` is the (Hermitian)
// system Hamiltonian in meV, `coupling` the exciton projector the phonon
// bath couples to. Returns rho -> -(P L rho - L rho P - P rho L^+ + rho L^+ P)
// with L = sum_{m,n} rate(lambda_m - lambda_n) Pi_m P Pi_n.
inline Superoperator build_phonon_dissipator(const ComplexMatrix& h_mev,
                                             const ComplexMatrix& coupling,
                                             const PhononParams& p) {
    p.validate();
    const int d = h_mev.dim();
    if (coupling.dim() != d)
        throw std::invalid_argument("build_phonon_dissipator: dimension mismatch");
    if (p.eta_mev2 == 0.0) return Superoperator::zero(d);

    const EigenResult eig = eigendecompose_hermitian(h_mev);
    // P in the eigenbasis
    ComplexMatrix p_eig = eig.vectors.adjoint() * coupling * eig.vectors;
    ComplexMatrix lambda_eig(d);
    for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n)
            lambda_eig(m, n) = half_fourier_rate(eig.values[m] - eig.values[n], p) * p_eig(m, n);
    ComplexMatrix lam = eig.vectors * lambda_eig * eig.vectors.adjoint();
    ComplexMatrix lam_adj = lam.adjoint();

    Superoperator k = Superoperator::zero(d);
    k -= Superoperator::left_mult(coupling * lam);
    k += Superoperator::sandwich(lam, coupling);
    k += Superoperator::sandwich(coupling, lam_adj);
    k -= Superoperator::right_mult(lam_adj * coupling);
    return k;
}

}  // namespace qdhom
