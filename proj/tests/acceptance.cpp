// Acceptance gate: one pass/fail line per criterion, exit 0 only when all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qdhom/correlations.hpp"
#include "qdhom/dynamics.hpp"
#include "qdhom/fitting.hpp"
#include "qdhom/io.hpp"
#include "qdhom/model.hpp"
#include "qdhom/phonon.hpp"

using namespace qdhom;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& what) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, what.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SystemParams reference_params() {
    SystemParams p;
    p.g_mev = 0.034;
    p.kappa_mev = 0.42;
    p.gamma_b = 1.0 / 730.0;
    p.gamma_pd = energy_to_rate(1e-3);
    p.alpha = 1.0 / 3.2;
    p.delta_mev = 0.0;
    return p;
}

// --- 1. analytic-numeric oracle over randomized parameter sets ---------------
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    double worst = 0.0;
    int accepted = 0;
    bool ok = true;
    std::string detail;
    while (accepted < 10) {
        SystemParams p;
        p.g_mev = 1e-3 * (20.0 + 30.0 * u(rng));
        p.kappa_mev = 0.3 + 0.3 * u(rng);
        p.gamma_b = 1.0 / (500.0 + 500.0 * u(rng));
        p.gamma_pd = energy_to_rate(1e-3 * 3.0 * u(rng));
        p.alpha = 1.0 / (3.0 + 17.0 * u(rng));
        p.delta_mev = -0.2 + 0.4 * u(rng);
        if (validity_ratio(p) < 5.0) continue;
        ++accepted;

        const EffectiveParams eff = adiabatic_eliminated_params(p);
        try {
            const G1Numeric g1 = build_g1_eliminated(eff);
            for (double tau : default_hom_delays(eff, 41)) {
                const CoalescenceResult r = coalescence_numeric(g1, tau);
                const double numeric = g2_hom_numeric(r, 0.0);
                const double analytic = g2_hom_analytic(r.tau_d_used_ps, eff);
                worst = std::max(worst, std::abs(numeric - analytic));
            }
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("; pipeline error: ") + e.what();
            break;
        }
    }
    const double elapsed = seconds_since(t0);
    ok = ok && worst < 1e-3 && elapsed < 60.0;
    std::ostringstream msg;
    msg << "analytic-numeric HOM oracle, 10 random sets, max |err| = " << worst
        << " (< 1e-3), " << elapsed << " s (< 60 s)" << detail;
    report(1, ok, msg.str());
}

// --- 2. full vs eliminated visibility ----------------------------------------
void criterion_2() {
    SystemParams p = reference_params();
    // The eliminated formula describes the dipole coherence, so the numeric
    // comparison reads out the emitter channel directly.
    p.channel = EmissionChannel::qd;
    const double nu_formula = visibility(adiabatic_eliminated_params(p));
    const double nu_full = numeric_visibility(p);
    const double rel = std::abs(nu_full / nu_formula - 1.0);
    std::ostringstream msg;
    msg << "full-model visibility " << nu_full << " vs eliminated formula " << nu_formula
        << ", relative difference " << rel << " (< 2%)";
    report(2, rel < 0.02, msg.str());
}

// --- 3. limits of the analytic dip -------------------------------------------
void criterion_3() {
    const EffectiveParams eff = adiabatic_eliminated_params(reference_params());
    const double nu = visibility(eff);

    bool ok = std::abs(g2_hom_analytic(0.0, eff) - 0.5 * (1.0 - nu)) < 1e-6;
    ok = ok && std::abs(g2_hom_analytic(1e9, eff) - 0.5) < 1e-6 &&
         std::abs(g2_hom_analytic(-1e9, eff) - 0.5) < 1e-6;

    EffectiveParams fast = eff;
    fast.alpha = 1e6 * eff.gamma;
    const double nu_fast = visibility(fast);
    double worst = 0.0;
    for (double tau : {0.0, 5.0, 20.0, 67.0, 134.0, 400.0}) {
        const double fig3_model = 0.5 * (1.0 - nu_fast * std::exp(-eff.gamma * tau));
        worst = std::max(worst, std::abs(g2_hom_analytic(tau, fast) - fig3_model));
    }
    ok = ok && worst < 1e-6;
    std::ostringstream msg;
    msg << "dip limits: g2(0) = (1-nu)/2, g2(inf) = 1/2, fast-pump limit error " << worst
        << " (all < 1e-6)";
    report(3, ok, msg.str());
}

// --- 4. Purcell fit round trip ------------------------------------------------
void criterion_4() {
    const double gamma0 = 1.0 / 67.0;
    const LifetimeModel truth{gamma0 / 8.8, gamma0 * 7.8 / 8.8, 0.21};  // F_P = 7.8

    Dataset d;
    std::mt19937_64 rng(1004);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int i = 0; i < 15; ++i) {
        const double delta = -0.7 + 1.4 * i / 14.0;
        const double t1 = truth.t1(delta);
        d.x.push_back(delta);
        d.y.push_back(t1 * (1.0 + noise(rng)));
        d.sigma.push_back(0.01 * t1);
    }

    const FitResult f = fit_lifetime_lorentzian(d, 0.42);
    const LifetimeModel fitted = LifetimeModel::from_fit(f);
    const double fp_err = std::abs(f.params.at("f_p") / truth.purcell_factor() - 1.0);
    const double t1_off = fitted.t1(0.61);
    const bool ok = f.converged && fp_err < 0.05 && t1_off > 250.0 && t1_off < 350.0;
    std::ostringstream msg;
    msg << "Purcell fit: F_P error " << fp_err << " (< 5%), T1(0.61 meV) = " << t1_off
        << " ps (in [250, 350])";
    report(4, ok, msg.str());
}

// --- 5. regime discrimination (the regime-degeneracy argument) ---------------
void criterion_5() {
    const double gamma0 = 1.0 / 67.0;
    const LifetimeModel lt{gamma0 / 8.8, gamma0 * 7.8 / 8.8, 0.21};
    const double alpha_true = 1.0 / 3.2;
    const double gamma_true = energy_to_rate(1.6e-3);
    const EffectiveParams eff{lt.decay_rate(0.0), gamma_true, alpha_true, 0.0};

    std::mt19937_64 rng(1005);
    std::normal_distribution<double> noise(0.0, 0.02);

    Dataset dip;
    for (int i = 0; i < 41; ++i) {
        const double tau = -1340.0 + 2.0 * 1340.0 * i / 40.0;
        dip.x.push_back(tau);
        dip.y.push_back(g2_hom_analytic(tau, eff) + noise(rng));
        dip.sigma.push_back(0.02);
    }
    Dataset vis;
    for (int i = 0; i < 61; ++i) {
        const double delta = -0.7 + 1.4 * i / 60.0;
        const EffectiveParams e{lt.decay_rate(delta), gamma_true, alpha_true, delta};
        vis.x.push_back(delta);
        vis.y.push_back(visibility(e) + noise(rng));
        vis.sigma.push_back(0.02);
    }

    const FitResult joint = fit_hom_joint(dip, vis, lt);
    const double ta_err = std::abs(joint.params.at("t_alpha_ps") / 3.2 - 1.0);
    const double g_err = std::abs(joint.params.at("gamma_uev") / 1.6 - 1.0);

    const FitResult jitter = fit_hom_dip_jitter(dip, lt);
    const double true_dip_residual =
        chi_square(dip, [&](double tau) { return g2_hom_analytic(tau, eff); });
    const bool degeneracy = jitter.converged && jitter.params.at("gamma_uev") == 0.0 &&
                            jitter.params.at("t_alpha_ps") > 10.0 &&
                            jitter.residual < 2.0 * true_dip_residual;

    const bool ok = joint.converged && ta_err < 0.15 && g_err < 0.15 && degeneracy;
    std::ostringstream msg;
    msg << "joint fit: T_alpha error " << ta_err << ", gamma error " << g_err
        << " (< 15%); dip-only jitter solution T_alpha = " << jitter.params.at("t_alpha_ps")
        << " ps with residual " << jitter.residual << " vs true " << true_dip_residual
        << " (< 2x)";
    report(5, ok, msg.str());
}

// --- 6. phonon physics ---------------------------------------------------------
void criterion_6() {
    bool ok = true;
    std::ostringstream msg;
    msg << "phonons:";

    PhononParams ph;
    ph.eta_mev2 = 0.032;
    ph.omega_c_mev = 1.3;

    // detailed balance at 10 K, and zero absorption at 0 K
    ph.temperature_k = 10.0;
    const double w = 0.3;
    const double balance =
        half_fourier_rate(-w, ph).real() / half_fourier_rate(w, ph).real();
    const double boltz = std::exp(-w / (constants::kb_mev_per_k * 10.0));
    ok = ok && std::abs(balance / boltz - 1.0) < 1e-6;
    msg << " detailed-balance error " << std::abs(balance / boltz - 1.0) << " (< 1e-6);";

    ph.temperature_k = 0.0;
    ok = ok && half_fourier_rate(-w, ph).real() == 0.0;

    // detuning asymmetry of the visibility at T <= 10 K
    SystemParams p = reference_params();
    p.temperature_k = 5.0;
    ph.temperature_k = 5.0;
    p.phonon = ph;
    p.delta_mev = 0.5;
    const double nu_plus = numeric_visibility(p);
    p.delta_mev = -0.5;
    const double nu_minus = numeric_visibility(p);
    const double asym_on = std::abs(nu_plus - nu_minus);

    SystemParams q = reference_params();
    q.temperature_k = 5.0;
    q.delta_mev = 0.5;
    const double off_plus = numeric_visibility(q);
    q.delta_mev = -0.5;
    const double asym_off = std::abs(off_plus - numeric_visibility(q));
    ok = ok && asym_on > 1e-3 && asym_off < 1e-6;
    msg << " asymmetry " << asym_on << " on (> 1e-3), " << asym_off << " off (< 1e-6);";

    // on-resonance phonon share of the dephasing at the reference operating point
    SystemParams r = reference_params();  // gamma_pd = 1 ueV, T = 17.5 K
    ph.temperature_k = r.temperature_k;
    r.phonon = ph;
    const double gamma_eq = effective_dephasing_equivalent(r);
    // Phonon-equivalent dephasing relative to the constant gamma = 1 ueV,
    // mirroring how the reference value was constructed (constant dephasing
    // reduced so that phonons supply the remainder).
    const double fraction = (gamma_eq - r.gamma_pd) / r.gamma_pd;
    ok = ok && fraction > 0.30 && fraction < 0.50;
    msg << " phonon dephasing share " << fraction << " of the constant rate (in [0.30, 0.50])";

    report(6, ok, msg.str());
}

// --- 7. invariant suite within its time budget --------------------------------
void criterion_7() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::ostringstream msg;

    const SystemParams p = reference_params();
    const Superoperator l = build_full_generator(p);
    const double t_max = 12.0 * std::max(1.0 / purcell_rate(p), 1.0 / p.alpha);
    const Trajectory traj = evolve_exact(l, initial_state(), TimeGrid(0.0, t_max / 600, 601));
    for (std::size_t i = 0; i < traj.states.size(); i += 20) {
        const DensityCheck c = check_density_matrix(traj.states[i]);
        ok = ok && c.trace_defect < 1e-9 && c.hermiticity < 1e-10 &&
             c.min_eigenvalue > -1e-6;
    }

    SystemParams tp = reference_params();
    tp.temperature_k = 10.0;
    PhononParams ph;
    ph.eta_mev2 = 0.032;
    ph.omega_c_mev = 1.3;
    ph.temperature_k = 10.0;
    tp.phonon = ph;
    const Trajectory tcl = evolve_exact(build_full_generator(tp), initial_state(),
                                        TimeGrid(0.0, t_max / 600, 601));
    for (std::size_t i = 0; i < tcl.states.size(); i += 20) {
        const DensityCheck c = check_density_matrix(tcl.states[i]);
        ok = ok && c.trace_defect < 1e-9 && c.hermiticity < 1e-10 &&
             c.min_eigenvalue > -1e-5;
    }

    const CorrelationGrid g2 =
        g2_hbt_regression(l, emission_operator(p.channel), traj, TimeGrid(0.0, 1.0, 200));
    double g2_max = 0.0;
    for (const cplx& v : g2.values) g2_max = std::max(g2_max, std::abs(v));
    ok = ok && g2_max < 1e-12;

    SystemParams pe = reference_params();
    pe.delta_mev = 0.37;
    const double gp = purcell_rate(pe);
    pe.delta_mev = -0.37;
    ok = ok && gp == purcell_rate(pe);

    const EffectiveParams eff = adiabatic_eliminated_params(p);
    for (double tau : {1.0, 13.0, 90.0})
        ok = ok && g2_hom_analytic(tau, eff) == g2_hom_analytic(-tau, eff);

    ok = ok && coherence_time(67.0, 0.0) == 134.0;

    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 120.0;
    msg << "invariants (trace, hermiticity, positivity, G2_HBT = " << g2_max
        << ", evenness, T2 = 2 T1) in " << elapsed << " s (< 120 s)";
    report(7, ok, msg.str());
}

// --- 8. CLI determinism --------------------------------------------------------
std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_8() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "qdhom_acceptance";
    fs::create_directories(dir);

    const std::string cfg = (dir / "p.cfg").string();
    {
        std::ofstream out(cfg, std::ios::binary | std::ios::trunc);
        out << "g_uev = 34\nkappa_mev = 0.42\ngamma_b_inv_ps = 730\n"
               "gamma_pd_uev = 1.6\nt_alpha_ps = 3.2\n";
    }
    const std::string mich = (dir / "michelson.csv").string();
    {
        std::ofstream out(mich, std::ios::binary | std::ios::trunc);
        out << "path_delay_ps,contrast,contrast_err\n";
        for (int i = 0; i <= 20; ++i) {
            const double tau = 15.0 * i;
            out << tau << "," << michelson_contrast(tau, 0.05, 0.9, 93.0) << ",0.01\n";
        }
    }

    const std::string cli = QDHOM_CLI_PATH;
    const auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + cli + "\" " + args + " 2> /dev/null";
        return std::system(cmd.c_str());
    };

    bool ok = true;
    std::string detail;

    const std::string dip1 = (dir / "dip1.csv").string(), dip2 = (dir / "dip2.csv").string();
    if (run("hom-dip --config \"" + cfg + "\" --out \"" + dip1 + "\"") != 0 ||
        run("hom-dip --config \"" + cfg + "\" --out \"" + dip2 + "\"") != 0) {
        ok = false;
        detail += " hom-dip run failed;";
    } else if (slurp(dip1).empty() || slurp(dip1) != slurp(dip2)) {
        ok = false;
        detail += " hom-dip outputs differ;";
    }

    const std::string sim1 = (dir / "sim1.json").string(), sim2 = (dir / "sim2.json").string();
    if (run("simulate --config \"" + cfg + "\" --out \"" + sim1 + "\"") != 0 ||
        run("simulate --config \"" + cfg + "\" --out \"" + sim2 + "\"") != 0) {
        ok = false;
        detail += " simulate run failed;";
    } else if (slurp(sim1).empty() || slurp(sim1) != slurp(sim2)) {
        ok = false;
        detail += " simulate outputs differ;";
    }

    const std::string f1 = (dir / "f1.json").string(), f2 = (dir / "f2.json").string();
    if (run("fit michelson --data \"" + mich + "\" --seed 42 --out \"" + f1 + "\"") != 0 ||
        run("fit michelson --data \"" + mich + "\" --seed 42 --out \"" + f2 + "\"") != 0) {
        ok = false;
        detail += " fit run failed;";
    } else if (slurp(f1).empty() || slurp(f1) != slurp(f2)) {
        ok = false;
        detail += " fit outputs differ;";
    }

    report(8, ok, "CLI byte-determinism across repeated runs (hom-dip CSV, simulate JSON, "
                  "seeded fit JSON)" + detail);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
