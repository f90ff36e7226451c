#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qdhom/linalg.hpp"
#include "qdhom/model.hpp"

namespace qdhom {

struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    int n = 0;

    TimeGrid() = default;
    TimeGrid(double t0_, double dt_, int n_) : t0(t0_), dt(dt_), n(n_) {
        if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be > 0");
        if (n < 2) throw std::invalid_argument("TimeGrid: need at least 2 points");
    }
    double time(int i) const { return t0 + dt * i; }
    double span() const { return dt * (n - 1); }
};

// Default step: resolves the fastest of decay, pump relaxation and cavity
// timescales; stiff-free at these scales.
inline double default_dt(const SystemParams& p) {
    const double gamma = purcell_rate(p);
    return std::min({1.0 / gamma, 1.0 / p.alpha,
                     constants::hbar_mev_ps / p.kappa_mev}) / 50.0;
}

inline double default_t_max(const SystemParams& p) {
    const double gamma = purcell_rate(p);
    return 12.0 * std::max(1.0 / gamma, 1.0 / p.alpha);
}

struct Trajectory {
    TimeGrid grid;
    std::vector<ComplexMatrix> states;

    double population(int i, const ComplexMatrix& number_op) const {
        return (number_op * states[i]).trace().real();
    }
};

// Fixed-step RK4 integration of d rho/dt = L rho. Trace drift beyond 1e-6
// aborts with an instruction to reduce dt.
inline Trajectory evolve(const Superoperator& l, const ComplexMatrix& rho0,
                         const TimeGrid& grid) {
    const int d = l.hilbert_dim();
    if (rho0.dim() != d) throw std::invalid_argument("evolve: dimension mismatch");

    Trajectory traj;
    traj.grid = grid;
    traj.states.reserve(grid.n);
    traj.states.push_back(rho0);

    const int nv = d * d;
    std::vector<cplx> y = vectorize(rho0);
    std::vector<cplx> k1(nv), k2(nv), k3(nv), k4(nv), tmp(nv);
    const double h = grid.dt;
    const double trace0 = rho0.trace().real();

    for (int step = 1; step < grid.n; ++step) {
        l.apply_vec(y.data(), k1.data());
        for (int i = 0; i < nv; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        l.apply_vec(tmp.data(), k2.data());
        for (int i = 0; i < nv; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        l.apply_vec(tmp.data(), k3.data());
        for (int i = 0; i < nv; ++i) tmp[i] = y[i] + h * k3[i];
        l.apply_vec(tmp.data(), k4.data());
        for (int i = 0; i < nv; ++i)
            y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

        ComplexMatrix rho = unvectorize(y, d);
        const double drift = std::abs(rho.trace().real() - trace0);
        if (drift > 1e-6)
            throw std::runtime_error(
                "evolve: trace drift exceeds 1e-6; reduce the time step dt");
        traj.states.push_back(std::move(rho));
    }
    return traj;
}

// Two-time correlation values G(t_i, t_i + tau_j), row index i over the
// trajectory grid, column index j over the tau grid.
struct CorrelationGrid {
    TimeGrid t;
    TimeGrid tau;
    std::vector<cplx> values;  // row-major, nt x ntau

    cplx at(int i, int j) const { return values[static_cast<size_t>(i) * tau.n + j]; }

    // G1(t1, t2) for arbitrary argument order: Hermitian symmetry
    // G1(t1,t2) = conj(G1(t2,t1)), zero before the initial time and
    // bilinear interpolation inside the grid. Beyond the grid edge the
    // populations have decayed below tolerance and zero is returned.
    cplx eval(double t1, double t2) const {
        const bool swapped = t2 < t1;
        const double a = swapped ? t2 : t1;
        const double b = swapped ? t1 : t2;
        if (a < t.t0) return 0.0;
        const double x = (a - t.t0) / t.dt;
        const double y = (b - a) / tau.dt;
        const int i0 = static_cast<int>(x);
        const int j0 = static_cast<int>(y);
        if (i0 >= t.n - 1 || j0 >= tau.n - 1) return 0.0;
        const double fx = x - i0;
        const double fy = y - j0;
        const cplx v00 = at(i0, j0), v01 = at(i0, j0 + 1);
        const cplx v10 = at(i0 + 1, j0), v11 = at(i0 + 1, j0 + 1);
        const cplx v = (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) +
                       fx * ((1.0 - fy) * v10 + fy * v11);
        return swapped ? std::conj(v) : v;
    }
};

// Fixed-step propagation through the one-step matrix exponential, exact for
// a time-independent generator. The correlation pipeline uses this; evolve()
// stays RK4 so its convergence behaviour is testable.
inline Trajectory evolve_exact(const Superoperator& l, const ComplexMatrix& rho0,
                               const TimeGrid& grid) {
    const int d = l.hilbert_dim();
    if (rho0.dim() != d) throw std::invalid_argument("evolve_exact: dimension mismatch");
    const Superoperator prop = matrix_exponential(cplx(grid.dt, 0.0) * l);

    Trajectory traj;
    traj.grid = grid;
    traj.states.reserve(grid.n);
    traj.states.push_back(rho0);
    std::vector<cplx> y = vectorize(rho0), ynext(static_cast<size_t>(d) * d);
    for (int step = 1; step < grid.n; ++step) {
        prop.apply_vec(y.data(), ynext.data());
        std::swap(y, ynext);
        traj.states.push_back(unvectorize(y, d));
    }
    return traj;
}

namespace detail {

// Shared regression driver. Computes G(t_i, t_i + tau_j) =
// Tr[readout * exp(L tau_j)(seed_i)] with seed_i = left * rho(t_i) * right.
// Evaluated through the adjoint route: G(i,j) = w_j . vec(seed_i) with
// w_0 = vec(readout^dagger)^dagger and w_{j+1} = w_j exp(L dtau), which is
// algebraically identical to seeding and propagating each row.
inline CorrelationGrid regression(const Superoperator& l, const ComplexMatrix& left,
                                  const ComplexMatrix& right, const ComplexMatrix& readout,
                                  const Trajectory& traj, const TimeGrid& tau_grid) {
    const int d = l.hilbert_dim();
    if (left.dim() != d || right.dim() != d || readout.dim() != d ||
        traj.states.empty() || traj.states.front().dim() != d)
        throw std::invalid_argument("regression: dimension mismatch");

    const int nt = traj.grid.n;
    const int ntau = tau_grid.n;
    const int nv = d * d;

    CorrelationGrid grid;
    grid.t = traj.grid;
    grid.tau = tau_grid;
    grid.values.resize(static_cast<size_t>(nt) * ntau);

    // Seeds
    std::vector<std::vector<cplx>> seeds(nt);
    for (int i = 0; i < nt; ++i) seeds[i] = vectorize(left * traj.states[i] * right);

    // One-step propagator for the tau direction (exact for a fixed step).
    const Superoperator prop =
        matrix_exponential(cplx(tau_grid.dt, 0.0) * l);
    // Adjoint row vector w with w_j[k] such that G = sum_k w_j[k] seed[k].
    // Tr[R M] = vec(R^dagger)^dagger vec(M).
    std::vector<cplx> w = vectorize(readout.adjoint());
    for (auto& v : w) v = std::conj(v);

    std::vector<cplx> wnext(nv);
    const auto& pm = prop.matrix();
    for (int j = 0; j < ntau; ++j) {
        for (int i = 0; i < nt; ++i) {
            cplx s = 0.0;
            const cplx* seed = seeds[i].data();
            for (int k = 0; k < nv; ++k) s += w[k] * seed[k];
            grid.values[static_cast<size_t>(i) * ntau + j] = s;
        }
        if (j + 1 < ntau) {
            for (int c = 0; c < nv; ++c) {
                cplx s = 0.0;
                for (int r = 0; r < nv; ++r) s += w[r] * pm(r, c);
                wnext[c] = s;
            }
            std::swap(w, wnext);
        }
    }
    return grid;
}

}  // namespace detail

// G1(t, t+tau) = Tr[sigma exp(L tau)(rho(t) sigma^dagger)], the
// G1(t1,t2) = <a^dagger(t1) a(t2)> convention.
inline CorrelationGrid g1_regression(const Superoperator& l, const ComplexMatrix& sigma,
                                     const Trajectory& traj, const TimeGrid& tau_grid) {
    return detail::regression(l, ComplexMatrix::identity(sigma.dim()), sigma.adjoint(),
                              sigma, traj, tau_grid);
}

// G2(t, t+tau) = Tr[sigma^dagger sigma exp(L tau)(sigma rho(t) sigma^dagger)].
inline CorrelationGrid g2_hbt_regression(const Superoperator& l, const ComplexMatrix& sigma,
                                         const Trajectory& traj, const TimeGrid& tau_grid) {
    return detail::regression(l, sigma, sigma.adjoint(), sigma.adjoint() * sigma, traj,
                              tau_grid);
}

}  // namespace qdhom
