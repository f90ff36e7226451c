#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qdhom/correlations.hpp"
#include "qdhom/dynamics.hpp"
#include "qdhom/model.hpp"

using namespace qdhom;

namespace {

SystemParams reference_params() {
    SystemParams p;
    p.g_mev = 0.034;
    p.kappa_mev = 0.42;
    p.gamma_b = 1.0 / 730.0;
    p.gamma_pd = energy_to_rate(1e-3);  // 1 ueV
    p.alpha = 1.0 / 3.2;
    p.delta_mev = 0.0;
    return p;
}

}  // namespace

TEST_CASE("JC Hamiltonian structure") {
    SystemParams p = reference_params();

    p.g_mev = 1e-30;  // effectively zero, validation still passes
    p.delta_mev = 0.0;
    CHECK(build_jc_hamiltonian(p).max_abs() < 1e-15);

    p.delta_mev = 0.61;
    ComplexMatrix h = build_jc_hamiltonian(p);
    CHECK(std::abs(h(basis::exciton0, basis::exciton0) - cplx(0.61)) < 1e-15);
    CHECK(std::abs(h(basis::pump0, basis::pump0)) == 0.0);
    CHECK(std::abs(h(basis::ground0, basis::ground0)) == 0.0);

    p.g_mev = 0.034;
    p.delta_mev = 0.0;
    const EigenResult e = eigendecompose_hermitian(build_jc_hamiltonian(p));
    CHECK(e.values.front() == Catch::Approx(-0.034).margin(1e-12));
    CHECK(e.values.back() == Catch::Approx(0.034).margin(1e-12));
}

TEST_CASE("Purcell rate") {
    SystemParams p = reference_params();

    SECTION("g = 0 reduces to the background rate") {
        p.g_mev = 0.0;  // purcell_rate itself places no lower bound on g
        CHECK(purcell_rate(p) == Catch::Approx(p.gamma_b).epsilon(1e-15));
    }

    SECTION("Lorentzian half-width identity") {
        const double gt = gamma_tot(p);
        const double cavity0 = purcell_rate(p) - p.gamma_b;
        p.delta_mev = rate_to_energy(gt);
        const double cavity_half = purcell_rate(p) - p.gamma_b;
        CHECK(cavity_half == Catch::Approx(0.5 * cavity0).epsilon(1e-12));
    }

    SECTION("reference lifetime lands in the measured window") {
        const double t1 = 1.0 / purcell_rate(p);
        CHECK(t1 > 50.0);
        CHECK(t1 < 80.0);
    }

    SECTION("even in detuning") {
        p.delta_mev = 0.37;
        const double plus = purcell_rate(p);
        p.delta_mev = -0.37;
        CHECK(purcell_rate(p) == plus);
    }
}

TEST_CASE("Purcell factor") {
    SystemParams p = reference_params();
    SystemParams p0 = p;
    p0.g_mev = 0.0;
    CHECK(purcell_factor(p0) == Catch::Approx(0.0).margin(1e-15));

    const double fp = purcell_factor(p);
    SystemParams p2 = p;
    p2.g_mev = 2.0 * p.g_mev;
    CHECK(purcell_factor(p2) == Catch::Approx(4.0 * fp).epsilon(1e-12));
}

TEST_CASE("gamma_tot fixed-point variant stays close to the main form") {
    SystemParams p = reference_params();
    const double main_form = purcell_rate(p);
    p.gamma_tot_uses_purcell = true;
    const double appendix_form = purcell_rate(p);
    // The two forms differ by roughly (Gamma - Gamma_B) / (kappa + Gamma_B),
    // about 2% at the reference parameters.
    CHECK(std::abs(appendix_form / main_form - 1.0) < 0.03);
    CHECK(appendix_form < main_form);
}

TEST_CASE("adiabatic eliminated params pass through") {
    SystemParams p = reference_params();
    const EffectiveParams eff = adiabatic_eliminated_params(p);
    CHECK(eff.gamma == purcell_rate(p));
    CHECK(eff.gamma >= p.gamma_b);
    CHECK(eff.gamma_pd == p.gamma_pd);
    CHECK(eff.alpha == p.alpha);
    CHECK(eff.delta_mev == p.delta_mev);
}

TEST_CASE("validity ratio") {
    SystemParams p = reference_params();
    // dominant-kappa limit: ratio ~ kappa / (2g) ~ 6.2
    CHECK(validity_ratio(p) == Catch::Approx(6.2).margin(0.7));

    SECTION("monotone decreasing once detuning dominates") {
        double prev = validity_ratio(p);
        for (double d : {0.2, 0.4, 0.8, 1.6}) {
            p.delta_mev = d;
            const double r = validity_ratio(p);
            CHECK(r < prev);
            prev = r;
        }
    }

    SECTION("sentinel when all comparison scales vanish") {
        SystemParams q = reference_params();
        q.g_mev = 0.0;
        q.gamma_b = 0.0;
        q.delta_mev = 0.0;
        CHECK(validity_ratio(q) == 1e12);
    }
}

TEST_CASE("parameter validation") {
    SystemParams p = reference_params();
    p.g_mev = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = reference_params();
    p.gamma_pd = -1e-6;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = reference_params();
    p.temperature_k = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("zero-rate dissipator terms vanish") {
    const ComplexMatrix a = ComplexMatrix::ket_bra(4, 3, 1);
    CHECK(detail::lindblad_term(a, 0.0).matrix().max_abs() < 1e-15);
    CHECK(detail::hamiltonian_term(ComplexMatrix::zero(4)).matrix().max_abs() < 1e-15);
}

TEST_CASE("generator preserves trace and hermiticity") {
    const Superoperator l = build_lindblad_generator(reference_params());

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        ComplexMatrix m(4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) m(i, j) = cplx(u(rng), u(rng));
        ComplexMatrix h = m;
        h += m.adjoint();
        h *= cplx(0.5, 0.0);

        const ComplexMatrix out = l.apply(h);
        CHECK(hermiticity_defect(out) < 1e-10);
        CHECK(std::abs(out.trace()) < 1e-10);
    }
}

TEST_CASE("decay chain ends in the ground state") {
    const SystemParams p = reference_params();
    const Superoperator l = build_lindblad_generator(p);
    const double t_max = 12.0 * std::max(1.0 / purcell_rate(p), 1.0 / p.alpha);
    const Trajectory traj = evolve_exact(l, initial_state(), TimeGrid(0.0, t_max / 200, 201));
    const ComplexMatrix& rho = traj.states.back();
    ComplexMatrix target = ComplexMatrix::ket_bra(basis::dim, basis::ground0, basis::ground0);
    target -= rho;
    CHECK(target.max_abs() < 1e-5);
    CHECK(std::abs(rho.trace() - cplx(1.0)) < 1e-9);
}

TEST_CASE("eliminated model population matches the closed form") {
    const SystemParams p = reference_params();
    const EffectiveParams eff = adiabatic_eliminated_params(p);
    const Superoperator l = build_eliminated_generator(eff);
    const TimeGrid grid(0.0, 0.5, 400);
    const Trajectory traj = evolve_exact(l, initial_state(), grid);
    for (int i = 0; i < grid.n; i += 7) {
        const double expected =
            excited_population_analytic(grid.time(i), eff.alpha, eff.gamma);
        const double actual = traj.states[i](basis::exciton0, basis::exciton0).real();
        CHECK(actual == Catch::Approx(expected).margin(1e-8));
    }
}

TEST_CASE("full-model tail decay matches the Purcell rate") {
    const SystemParams p = reference_params();
    REQUIRE(validity_ratio(p) >= 5.0);
    const Superoperator l = build_full_generator(p);
    const TimeGrid grid(0.0, 1.0, 501);
    const Trajectory traj = evolve_exact(l, initial_state(), grid);
    const double p1 = traj.states[300](basis::exciton0, basis::exciton0).real();
    const double p2 = traj.states[400](basis::exciton0, basis::exciton0).real();
    const double rate = std::log(p1 / p2) / 100.0;
    CHECK(rate == Catch::Approx(purcell_rate(p)).epsilon(0.05));
}

TEST_CASE("phonon dissipator wrapper") {
    SystemParams p = reference_params();
    CHECK_THROWS_AS(build_phonon_dissipator(p), std::invalid_argument);
    PhononParams ph;
    ph.eta_mev2 = 0.0;
    p.phonon = ph;
    CHECK(build_phonon_dissipator(p).matrix().max_abs() < 1e-15);
}
