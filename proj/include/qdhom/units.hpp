#pragma once

#include <cmath>
#include <stdexcept>

namespace qdhom {

// Internal unit system: energies in meV, times in ps, rates in 1/ps,
// temperatures in K. All conversions route through these constants.
namespace constants {
inline constexpr double hbar_mev_ps = 0.6582119569;   // meV·ps
inline constexpr double kb_mev_per_k = 0.0861733;     // meV/K
}  // namespace constants

inline double energy_to_rate(double e_mev) {
    if (!std::isfinite(e_mev))
        throw std::domain_error("energy_to_rate: non-finite energy");
    return e_mev / constants::hbar_mev_ps;
}

inline double rate_to_energy(double r_inv_ps) {
    if (!std::isfinite(r_inv_ps))
        throw std::domain_error("rate_to_energy: non-finite rate");
    return r_inv_ps * constants::hbar_mev_ps;
}

inline double uev_to_mev(double x) { return 1e-3 * x; }
inline double mev_to_uev(double x) { return 1e3 * x; }
inline double ns_to_ps(double x) { return 1e3 * x; }
inline double ps_to_ns(double x) { return 1e-3 * x; }

// Bose-Einstein occupation at energy e_mev and temperature t_k.
// The omega -> 0 divergence is the caller's problem (quadratures fold the
// sign and limit into their own rate selection).
inline double thermal_occupation(double e_mev, double t_k) {
    if (e_mev <= 0.0)
        throw std::domain_error("thermal_occupation: energy must be positive");
    if (t_k < 0.0)
        throw std::domain_error("thermal_occupation: negative temperature");
    if (t_k == 0.0) return 0.0;
    const double x = e_mev / (constants::kb_mev_per_k * t_k);
    return 1.0 / std::expm1(x);
}

}  // namespace qdhom
