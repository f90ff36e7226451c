#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdhom/correlations.hpp"
#include "qdhom/fitting.hpp"
#include "qdhom/model.hpp"

namespace qdhom {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config files: UTF-8 key=value lines, '#' comments. Unknown keys are an
// error (with the offending line number), so typos never silently fall back
// to defaults.

struct Config {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }

    double number(const std::string& key, double fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        std::size_t pos = 0;
        double v;
        try {
            v = std::stod(it->second, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("config: key '" + key + "' is not numeric: " + it->second);
        }
        while (pos < it->second.size() && std::isspace(static_cast<unsigned char>(it->second[pos])))
            ++pos;
        if (pos != it->second.size() || !std::isfinite(v))
            throw std::runtime_error("config: key '" + key + "' is not a finite number: " +
                                     it->second);
        return v;
    }

    bool flag(const std::string& key, bool fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "on") return true;
        if (it->second == "false" || it->second == "0" || it->second == "off") return false;
        throw std::runtime_error("config: key '" + key + "' is not a boolean: " + it->second);
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "g_uev",          "kappa_mev",        "gamma_b_inv_ps", "gamma_pd_uev",
        "t_alpha_ps",     "delta_mev",        "temperature_k",  "phonon_eta_mev2",
        "phonon_omega_c_mev", "phonon_enabled", "emission_channel", "lamb_shift",
        // grid overrides
        "grid_t_max_factor", "grid_scale_points", "grid_min_nt", "grid_min_ntau",
        "grid_conv_tol"};
    return keys;
}

}  // namespace detail

inline Config parse_config(std::istream& in) {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key=value");
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string value = detail::trim(body.substr(eq + 1));
        const auto& known = detail::known_config_keys();
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": unknown key '" + key + "'");
        if (cfg.values.count(key))
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": duplicate key '" + key + "'");
        cfg.values[key] = value;
    }
    return cfg;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return parse_config(in);
}

inline SystemParams config_to_params(const Config& cfg) {
    SystemParams p;
    p.g_mev = uev_to_mev(cfg.number("g_uev", 34.0));
    p.kappa_mev = cfg.number("kappa_mev", 0.42);
    p.gamma_b = 1.0 / cfg.number("gamma_b_inv_ps", 730.0);
    p.gamma_pd = energy_to_rate(uev_to_mev(cfg.number("gamma_pd_uev", 0.0)));
    p.alpha = 1.0 / cfg.number("t_alpha_ps", 3.2);
    p.delta_mev = cfg.number("delta_mev", 0.0);
    p.temperature_k = cfg.number("temperature_k", 17.5);
    const std::string channel = cfg.text("emission_channel", "cavity");
    if (channel == "qd")
        p.channel = EmissionChannel::qd;
    else if (channel == "cavity")
        p.channel = EmissionChannel::cavity;
    else
        throw std::runtime_error("config: emission_channel must be 'qd' or 'cavity'");
    if (cfg.flag("phonon_enabled", false)) {
        PhononParams ph;
        ph.eta_mev2 = cfg.number("phonon_eta_mev2", 0.032);
        ph.omega_c_mev = cfg.number("phonon_omega_c_mev", 1.3);
        ph.temperature_k = p.temperature_k;
        ph.include_lamb_shift = cfg.flag("lamb_shift", false);
        p.phonon = ph;
    }
    p.validate();
    return p;
}

inline NumericOptions config_to_numeric_options(const Config& cfg) {
    NumericOptions o;
    o.t_max_factor = cfg.number("grid_t_max_factor", o.t_max_factor);
    o.scale_points = static_cast<int>(cfg.number("grid_scale_points", o.scale_points));
    o.min_nt = static_cast<int>(cfg.number("grid_min_nt", o.min_nt));
    o.min_ntau = static_cast<int>(cfg.number("grid_min_ntau", o.min_ntau));
    o.conv_tol = cfg.number("grid_conv_tol", o.conv_tol);
    return o;
}

// ---------------------------------------------------------------------------
// Dataset ingestion. Column semantics are fixed per kind; units are converted
// to the internal (meV, ps) system on load.

enum class DatasetKind { lifetime, homdip, visibility, g2zero, michelson };

namespace detail {

struct DatasetSchema {
    std::string header;
    double x_scale;  // applied to the first column on load
    std::string label;
};

inline DatasetSchema schema_for(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::lifetime:
            return {"delta_mev,t1_ps,t1_err_ps", 1.0, "lifetime"};
        case DatasetKind::homdip:
            return {"tau_d_ns,g2hom,g2hom_err", 1000.0, "homdip"};  // ns -> ps
        case DatasetKind::visibility:
            return {"delta_mev,dip_depth,dip_depth_err", 1.0, "visibility"};
        case DatasetKind::g2zero:
            return {"delta_mev,g2_zero,g2_zero_err", 1.0, "g2zero"};
        case DatasetKind::michelson:
            return {"path_delay_ps,contrast,contrast_err", 1.0, "michelson"};
    }
    throw std::logic_error("schema_for: unreachable");
}

inline double parse_cell(const std::string& cell, int row, const std::string& path) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": row " + std::to_string(row) +
                                 ": non-numeric cell '" + cell + "'");
    }
    if (pos != cell.size() || !std::isfinite(v))
        throw std::runtime_error(path + ": row " + std::to_string(row) +
                                 ": non-numeric cell '" + cell + "'");
    return v;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& path, DatasetKind kind) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset: cannot open " + path);
    const detail::DatasetSchema schema = detail::schema_for(kind);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line) != schema.header)
        throw std::runtime_error(path + ": header mismatch, expected '" + schema.header + "'");

    Dataset d;
    d.label = schema.label;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(detail::trim(cell));
        if (cells.size() < 2)
            throw std::runtime_error(path + ": row " + std::to_string(row) +
                                     ": missing column");
        const double x = detail::parse_cell(cells[0], row, path) * schema.x_scale;
        const double y = detail::parse_cell(cells[1], row, path);
        for (std::size_t i = 0; i < d.x.size(); ++i)
            if (d.x[i] == x && d.y[i] != y)
                throw std::runtime_error(path + ": row " + std::to_string(row) +
                                         ": duplicate x with differing y");
        d.x.push_back(x);
        d.y.push_back(y);
        if (cells.size() >= 3 && !cells[2].empty()) {
            const double s = detail::parse_cell(cells[2], row, path);
            if (!(s > 0.0))
                throw std::runtime_error(path + ": row " + std::to_string(row) +
                                         ": sigma must be positive");
            d.sigma.push_back(s);
        } else if (!d.sigma.empty()) {
            throw std::runtime_error(path + ": row " + std::to_string(row) +
                                     ": missing column");
        }
    }
    if (d.x.empty()) throw std::runtime_error(path + ": no rows");
    return d;
}

// ---------------------------------------------------------------------------
// Deterministic serialization. All numbers are printed with 17 significant
// digits so a double survives a write/parse round trip exactly.

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline void dump_json(const ordered_json& j, std::string& out, int depth) {
    const std::string pad(2 * static_cast<std::size_t>(depth), ' ');
    const std::string pad_in(2 * static_cast<std::size_t>(depth + 1), ' ');
    switch (j.type()) {
        case ordered_json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            std::size_t i = 0;
            for (auto it = j.begin(); it != j.end(); ++it, ++i) {
                out += pad_in + ordered_json(it.key()).dump() + ": ";
                dump_json(it.value(), out, depth + 1);
                if (i + 1 < j.size()) out += ",";
                out += "\n";
            }
            out += pad + "}";
            return;
        }
        case ordered_json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                out += pad_in;
                dump_json(j[i], out, depth + 1);
                if (i + 1 < j.size()) out += ",";
                out += "\n";
            }
            out += pad + "]";
            return;
        }
        case ordered_json::value_t::number_float:
            out += format_number(j.get<double>());
            return;
        default:
            out += j.dump();
            return;
    }
}

}  // namespace detail

inline std::string dump_result_document(const ordered_json& doc) {
    std::string out;
    detail::dump_json(doc, out, 0);
    out += "\n";
    return out;
}

// Atomic write: the content appears at `path` completely or not at all.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failure: " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

inline ordered_json read_result_document(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return ordered_json::parse(in);
}

// ---------------------------------------------------------------------------
// Curve emission: CSV with header, LF line endings, '.' decimal separator,
// deterministic ordering (rows in input order).

struct CurveTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline std::string render_curve(const CurveTable& t) {
    std::string out;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        out += (c ? "," : "") + t.columns[c];
    out += "\n";
    for (const auto& row : t.rows) {
        if (row.size() != t.columns.size())
            throw std::invalid_argument("render_curve: ragged row");
        for (std::size_t c = 0; c < row.size(); ++c)
            out += (c ? "," : "") + format_number(row[c]);
        out += "\n";
    }
    return out;
}

inline void emit_curve(const CurveTable& t, const std::string& path) {
    write_file_atomic(path, render_curve(t));
}

inline CurveTable hom_curve_table(const std::vector<double>& delays_ps,
                                  const HomCurve& analytic, const HomCurve& numeric) {
    if (analytic.g2hom.size() != delays_ps.size() || numeric.g2hom.size() != delays_ps.size())
        throw std::invalid_argument("hom_curve_table: curve length mismatch");
    CurveTable t;
    t.columns = {"tau_d_ps", "g2hom_analytic", "g2hom_numeric"};
    for (std::size_t i = 0; i < delays_ps.size(); ++i)
        t.rows.push_back({delays_ps[i], analytic.g2hom[i], numeric.g2hom[i]});
    return t;
}

inline ordered_json fit_result_to_json(const FitResult& f) {
    ordered_json j;
    ordered_json params = ordered_json::object();
    for (const auto& [k, v] : f.params) params[k] = v;
    j["params"] = params;
    j["residual"] = f.residual;
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    if (!f.intervals.empty()) {
        ordered_json iv = ordered_json::object();
        for (const auto& [k, v] : f.intervals) iv[k] = ordered_json::array({v.first, v.second});
        j["intervals_68"] = iv;
    }
    ordered_json curve = ordered_json::array();
    for (const auto& [x, y] : f.model_curve) curve.push_back(ordered_json::array({x, y}));
    j["model_curve"] = curve;
    return j;
}

}  // namespace qdhom
