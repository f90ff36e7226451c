#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qdhom/correlations.hpp"
#include "qdhom/fitting.hpp"
#include "qdhom/io.hpp"
#include "qdhom/model.hpp"
#include "qdhom/phonon.hpp"

namespace {

constexpr const char* kVersion = "qdhom 1.0.0";

// Exit codes: 0 success, 2 usage, 3 data error, 4 non-convergence,
// 5 validity warning promoted to error under --strict.
enum ExitCode { kOk = 0, kUsage = 2, kDataError = 3, kNoConvergence = 4, kValidity = 5 };

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    bool strict = false;
    std::uint64_t seed = 42;
    bool timing = false;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

qdhom::Config load_config_or_default(const CommonArgs& a) {
    if (a.config_path.empty()) return {};
    try {
        return qdhom::load_config(a.config_path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

qdhom::Dataset load_or_throw(const std::string& path, qdhom::DatasetKind kind) {
    try {
        return qdhom::load_dataset(path, kind);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

// The CLI never proceeds silently past a violated validity condition.
bool check_validity(const qdhom::SystemParams& p, bool strict) {
    const double ratio = qdhom::validity_ratio(p);
    if (ratio < qdhom::kDefaultValidityThreshold) {
        std::fprintf(stderr,
                     "warning: validity_ratio %.3g below threshold %.3g; "
                     "adiabatic elimination may be inaccurate\n",
                     ratio, qdhom::kDefaultValidityThreshold);
        if (strict) {
            std::fprintf(stderr, "error: aborting under --strict\n");
            return false;
        }
    }
    return true;
}

qdhom::ordered_json params_echo(const qdhom::SystemParams& p) {
    qdhom::ordered_json j;
    j["g_uev"] = qdhom::mev_to_uev(p.g_mev);
    j["kappa_mev"] = p.kappa_mev;
    j["gamma_b_inv_ps"] = 1.0 / p.gamma_b;
    j["gamma_pd_uev"] = qdhom::mev_to_uev(qdhom::rate_to_energy(p.gamma_pd));
    j["t_alpha_ps"] = 1.0 / p.alpha;
    j["delta_mev"] = p.delta_mev;
    j["temperature_k"] = p.temperature_k;
    j["emission_channel"] = p.channel == qdhom::EmissionChannel::qd ? "qd" : "cavity";
    j["phonon_enabled"] = p.phonon.has_value();
    if (p.phonon) {
        j["phonon_eta_mev2"] = p.phonon->eta_mev2;
        j["phonon_omega_c_mev"] = p.phonon->omega_c_mev;
        j["lamb_shift"] = p.phonon->include_lamb_shift;
    }
    return j;
}

qdhom::ordered_json derived_block(const qdhom::SystemParams& p) {
    const qdhom::EffectiveParams eff = qdhom::adiabatic_eliminated_params(p);
    qdhom::ordered_json j;
    j["gamma_inv_ps"] = eff.gamma;
    j["t1_ps"] = 1.0 / eff.gamma;
    j["gamma_tot_inv_ps"] = qdhom::gamma_tot(p);
    j["purcell_factor"] = qdhom::purcell_factor(p);
    j["validity_ratio"] = qdhom::validity_ratio(p);
    j["visibility"] = qdhom::visibility(eff);
    j["t2_ps"] = qdhom::coherence_time(1.0 / eff.gamma, eff.gamma_pd);
    return j;
}

void finalize_document(qdhom::ordered_json& doc, const CommonArgs& a, double wall_ms) {
    doc["tool_version"] = kVersion;
    // Timing is opt-in so default outputs stay byte-reproducible.
    if (a.timing) doc["wall_time_ms"] = wall_ms;
    const std::string text = qdhom::dump_result_document(doc);
    if (a.out_path.empty())
        std::fputs(text.c_str(), stdout);
    else
        qdhom::write_file_atomic(a.out_path, text);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

int cmd_simulate(const CommonArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const qdhom::Config cfg = load_config_or_default(a);
    const qdhom::SystemParams p = qdhom::config_to_params(cfg);
    if (!check_validity(p, a.strict)) return kValidity;

    const qdhom::NumericOptions opt = qdhom::config_to_numeric_options(cfg);
    qdhom::ordered_json doc;
    doc["input"] = params_echo(p);
    doc["derived"] = derived_block(p);
    doc["derived"]["visibility_numeric_full"] = qdhom::numeric_visibility(p, opt);

    finalize_document(doc, a, elapsed_ms(t0));
    return kOk;
}

int cmd_hom_dip(const CommonArgs& a, int n_delays) {
    const qdhom::Config cfg = load_config_or_default(a);
    const qdhom::SystemParams p = qdhom::config_to_params(cfg);
    if (!check_validity(p, a.strict)) return kValidity;

    const qdhom::NumericOptions opt = qdhom::config_to_numeric_options(cfg);
    const qdhom::EffectiveParams eff = qdhom::adiabatic_eliminated_params(p);
    const std::vector<double> delays = qdhom::default_hom_delays(eff, n_delays);
    const qdhom::HomCurve analytic = qdhom::hom_curve_analytic(eff, delays);
    const qdhom::G1Numeric g1 = qdhom::build_g1_eliminated(eff, opt);
    const qdhom::HomCurve numeric = qdhom::hom_curve_numeric(g1, delays, 0.0, opt);

    const qdhom::CurveTable table = qdhom::hom_curve_table(delays, analytic, numeric);
    if (a.out_path.empty())
        std::fputs(qdhom::render_curve(table).c_str(), stdout);
    else
        qdhom::emit_curve(table, a.out_path);
    return kOk;
}

int cmd_sweep(const CommonArgs& a, const std::string& param, double from, double to,
              int steps, const std::string& observable) {
    if (steps < 2) throw CLI::ValidationError("--steps must be at least 2");
    const qdhom::Config cfg = load_config_or_default(a);
    const qdhom::SystemParams base = qdhom::config_to_params(cfg);
    const qdhom::NumericOptions opt = qdhom::config_to_numeric_options(cfg);

    const auto apply = [&](double v) {
        qdhom::SystemParams p = base;
        if (param == "delta_mev")
            p.delta_mev = v;
        else if (param == "temperature_k") {
            p.temperature_k = v;
            if (p.phonon) p.phonon->temperature_k = v;
        } else if (param == "gamma_pd_uev")
            p.gamma_pd = qdhom::energy_to_rate(qdhom::uev_to_mev(v));
        else if (param == "t_alpha_ps")
            p.alpha = 1.0 / v;
        else if (param == "g_uev")
            p.g_mev = qdhom::uev_to_mev(v);
        else if (param == "kappa_mev")
            p.kappa_mev = v;
        else
            throw CLI::ValidationError("unknown sweep parameter: " + param);
        p.validate();
        return p;
    };

    qdhom::CurveTable table;
    bool any_warning = false;
    for (int i = 0; i < steps; ++i) {
        const double v = from + (to - from) * i / (steps - 1);
        const qdhom::SystemParams p = apply(v);
        if (qdhom::validity_ratio(p) < qdhom::kDefaultValidityThreshold) any_warning = true;
        const qdhom::EffectiveParams eff = qdhom::adiabatic_eliminated_params(p);
        if (observable == "visibility") {
            table.columns = {param, "visibility_analytic", "visibility_numeric"};
            table.rows.push_back(
                {v, qdhom::visibility(eff), qdhom::numeric_visibility(p, opt)});
        } else if (observable == "t1") {
            table.columns = {param, "t1_ps"};
            table.rows.push_back({v, 1.0 / eff.gamma});
        } else if (observable == "g2hom_zero") {
            table.columns = {param, "g2hom_zero_analytic"};
            table.rows.push_back({v, qdhom::g2_hom_analytic(0.0, eff)});
        } else {
            throw CLI::ValidationError("unknown observable: " + observable);
        }
    }
    if (any_warning) {
        std::fprintf(stderr,
                     "warning: validity_ratio below threshold for part of the sweep\n");
        if (a.strict) {
            std::fprintf(stderr, "error: aborting under --strict\n");
            return kValidity;
        }
    }
    if (a.out_path.empty())
        std::fputs(qdhom::render_curve(table).c_str(), stdout);
    else
        qdhom::emit_curve(table, a.out_path);
    return kOk;
}

int emit_fit(const CommonArgs& a, const qdhom::FitResult& fit,
             std::chrono::steady_clock::time_point t0) {
    if (!fit.converged) {
        std::fprintf(stderr, "error: fit did not converge after %d iterations\n",
                     fit.iterations);
        return kNoConvergence;
    }
    qdhom::ordered_json doc;
    doc["fit"] = qdhom::fit_result_to_json(fit);
    finalize_document(doc, a, elapsed_ms(t0));
    return kOk;
}

int cmd_fit_lifetime(const CommonArgs& a, const std::string& data_path) {
    const auto t0 = std::chrono::steady_clock::now();
    const qdhom::Config cfg = load_config_or_default(a);
    const double kappa = cfg.number("kappa_mev", 0.42);
    const qdhom::Dataset data = load_or_throw(data_path, qdhom::DatasetKind::lifetime);
    qdhom::FitResult fit = qdhom::fit_lifetime_lorentzian(data, kappa);
    qdhom::add_bootstrap_intervals(
        fit, data,
        [&](const qdhom::Dataset& d) { return qdhom::fit_lifetime_lorentzian(d, kappa); },
        200, a.seed);
    return emit_fit(a, fit, t0);
}

int cmd_fit_dip(const CommonArgs& a, const std::string& data_path, double t1_ps) {
    const auto t0 = std::chrono::steady_clock::now();
    if (t1_ps <= 0.0) {
        const qdhom::Config cfg = load_config_or_default(a);
        const qdhom::SystemParams p = qdhom::config_to_params(cfg);
        t1_ps = 1.0 / qdhom::purcell_rate(p);
    }
    const qdhom::Dataset data = load_or_throw(data_path, qdhom::DatasetKind::homdip);
    qdhom::FitResult fit = qdhom::fit_hom_dip_simple(data, t1_ps);
    qdhom::add_bootstrap_intervals(
        fit, data,
        [&](const qdhom::Dataset& d) { return qdhom::fit_hom_dip_simple(d, t1_ps); }, 200,
        a.seed);
    return emit_fit(a, fit, t0);
}

qdhom::LifetimeModel lifetime_calibration(const CommonArgs& a,
                                          const std::string& lifetime_json) {
    if (!lifetime_json.empty()) {
        try {
            const qdhom::ordered_json doc = qdhom::read_result_document(lifetime_json);
            const auto& params = doc.at("fit").at("params");
            return {params.at("gamma_b").get<double>(), params.at("r0").get<double>(),
                    params.at("gamma_w_mev").get<double>()};
        } catch (const std::exception& e) {
            throw DataError(std::string("lifetime calibration: ") + e.what());
        }
    }
    const qdhom::Config cfg = load_config_or_default(a);
    return qdhom::LifetimeModel::from_params(qdhom::config_to_params(cfg));
}

int cmd_fit_joint(const CommonArgs& a, const std::string& dip_path,
                  const std::string& vis_path, const std::string& lifetime_json) {
    const auto t0 = std::chrono::steady_clock::now();
    const qdhom::LifetimeModel lt = lifetime_calibration(a, lifetime_json);
    const qdhom::Dataset dip = load_or_throw(dip_path, qdhom::DatasetKind::homdip);
    const qdhom::Dataset vis = load_or_throw(vis_path, qdhom::DatasetKind::visibility);
    qdhom::FitResult fit = qdhom::fit_hom_joint(dip, vis, lt);
    return emit_fit(a, fit, t0);
}

int cmd_fit_michelson(const CommonArgs& a, const std::string& data_path) {
    const auto t0 = std::chrono::steady_clock::now();
    const qdhom::Dataset data = load_or_throw(data_path, qdhom::DatasetKind::michelson);
    qdhom::FitResult fit = qdhom::fit_michelson(data);
    qdhom::add_bootstrap_intervals(
        fit, data, [](const qdhom::Dataset& d) { return qdhom::fit_michelson(d); }, 200,
        a.seed);
    return emit_fit(a, fit, t0);
}

int cmd_phonon_rates(const CommonArgs& a, int points) {
    const qdhom::Config cfg = load_config_or_default(a);
    qdhom::SystemParams p = qdhom::config_to_params(cfg);
    if (!p.phonon) {
        qdhom::PhononParams ph;
        ph.temperature_k = p.temperature_k;
        p.phonon = ph;
    }
    const qdhom::PhononParams& ph = *p.phonon;
    const double span = 4.0 * ph.omega_c_mev;

    qdhom::CurveTable table;
    table.columns = {"omega_mev", "re_rate_inv_ps", "im_rate_inv_ps"};
    for (int i = 0; i < points; ++i) {
        const double w = -span + 2.0 * span * i / (points - 1);
        const qdhom::cplx r = qdhom::half_fourier_rate(w, ph);
        table.rows.push_back({w, r.real(), r.imag()});
    }
    if (a.out_path.empty())
        std::fputs(qdhom::render_curve(table).c_str(), stdout);
    else
        qdhom::emit_curve(table, a.out_path);
    return kOk;
}

int cmd_g2_correct(const CommonArgs& a, const std::string& data_path, double g2zero) {
    const qdhom::Dataset data = load_or_throw(data_path, qdhom::DatasetKind::homdip);
    int clamped = 0;
    const std::vector<double> corrected = qdhom::background_correct(data.y, g2zero, &clamped);
    if (clamped > 0)
        std::fprintf(stderr, "warning: %d corrected value(s) clamped at zero\n", clamped);

    qdhom::CurveTable table;
    table.columns = {"tau_d_ps", "g2hom_corrected"};
    for (std::size_t i = 0; i < data.x.size(); ++i)
        table.rows.push_back({data.x[i], corrected[i]});
    if (a.out_path.empty())
        std::fputs(qdhom::render_curve(table).c_str(), stdout);
    else
        qdhom::emit_curve(table, a.out_path);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HOM interference and lifetime modelling for a QD-microcavity emitter"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonArgs common;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "key=value configuration file");
        sub->add_option("--out", common.out_path, "output path (stdout when omitted)");
        sub->add_flag("--strict", common.strict,
                      "promote validity warnings to errors (exit 5)");
        sub->add_option("--seed", common.seed, "bootstrap RNG seed")->default_val(42);
        sub->add_flag("--timing", common.timing, "include wall time in JSON output");
    };

    auto* simulate = app.add_subcommand("simulate", "derived quantities for one parameter set");
    add_common(simulate);

    auto* homdip = app.add_subcommand("hom-dip", "analytic and numeric HOM dip curve");
    add_common(homdip);
    int n_delays = 41;
    homdip->add_option("--delays", n_delays, "number of delay points")->default_val(41);

    auto* sweep = app.add_subcommand("sweep", "observable vs a swept parameter");
    add_common(sweep);
    std::string sweep_param = "delta_mev", observable = "visibility";
    double sweep_from = 0.0, sweep_to = 0.0;
    int sweep_steps = 0;
    sweep->add_option("--param", sweep_param, "parameter to sweep")->required();
    sweep->add_option("--from", sweep_from)->required();
    sweep->add_option("--to", sweep_to)->required();
    sweep->add_option("--steps", sweep_steps)->required();
    sweep->add_option("--observable", observable, "visibility | t1 | g2hom_zero")->required();

    auto* fit = app.add_subcommand("fit", "least-squares fits");
    fit->require_subcommand(1);
    auto* fit_lt = fit->add_subcommand("lifetime", "Lorentzian T1 vs detuning");
    add_common(fit_lt);
    std::string lt_data;
    fit_lt->add_option("--data", lt_data, "lifetime.csv")->required();

    auto* fit_dip = fit->add_subcommand("dip", "single-visibility HOM dip");
    add_common(fit_dip);
    std::string dip_data;
    double dip_t1 = 0.0;
    fit_dip->add_option("--data", dip_data, "homdip.csv")->required();
    fit_dip->add_option("--t1-ps", dip_t1, "fixed T1 (from config when omitted)");

    auto* fit_joint = fit->add_subcommand("joint", "simultaneous dip + visibility fit");
    add_common(fit_joint);
    std::string joint_dip, joint_vis, joint_lt;
    fit_joint->add_option("--dip", joint_dip, "homdip.csv")->required();
    fit_joint->add_option("--vis", joint_vis, "visibility.csv")->required();
    fit_joint->add_option("--lifetime", joint_lt, "lifetime fit JSON for Gamma(Delta)");

    auto* fit_mich = fit->add_subcommand("michelson", "Gaussian contrast model");
    add_common(fit_mich);
    std::string mich_data;
    fit_mich->add_option("--data", mich_data, "michelson.csv")->required();

    auto* rates = app.add_subcommand("phonon-rates", "half-Fourier phonon rates vs frequency");
    add_common(rates);
    int rate_points = 201;
    rates->add_option("--points", rate_points)->default_val(201);

    auto* correct = app.add_subcommand("g2-correct", "background-correct HOM data");
    add_common(correct);
    std::string correct_data;
    double g2zero = 0.0;
    correct->add_option("--data", correct_data, "homdip.csv")->required();
    correct->add_option("--g2zero", g2zero, "measured HBT g2(0)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(common);
        if (homdip->parsed()) return cmd_hom_dip(common, n_delays);
        if (sweep->parsed())
            return cmd_sweep(common, sweep_param, sweep_from, sweep_to, sweep_steps,
                             observable);
        if (fit_lt->parsed()) return cmd_fit_lifetime(common, lt_data);
        if (fit_dip->parsed()) return cmd_fit_dip(common, dip_data, dip_t1);
        if (fit_joint->parsed()) return cmd_fit_joint(common, joint_dip, joint_vis, joint_lt);
        if (fit_mich->parsed()) return cmd_fit_michelson(common, mich_data);
        if (rates->parsed()) return cmd_phonon_rates(common, rate_points);
        if (correct->parsed()) return cmd_g2_correct(common, correct_data, g2zero);
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDataError;
    } catch (const ConvergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kNoConvergence;
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        std::fprintf(stderr, "error: %s\n", msg.c_str());
        return msg.find("converged") != std::string::npos ? kNoConvergence : kDataError;
    }
    return kUsage;
}
