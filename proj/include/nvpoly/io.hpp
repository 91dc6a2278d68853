#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvpoly/dispersion.hpp"
#include "nvpoly/state.hpp"
#include "nvpoly/steady_state.hpp"
#include "nvpoly/variational.hpp"

namespace nvpoly {

/// 17 significant digits: doubles round-trip exactly.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// FNV-1a over the canonical dump of a JSON document; stamped into every
/// emitted file so outputs are traceable to their configuration.
inline std::uint64_t config_hash(const nlohmann::json& j) {
    const std::string dump = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_string(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Line-oriented CSV emitter: '#'-prefixed config-hash line, a header, then
/// 17-digit rows with LF endings.
class CsvWriter {
public:
    CsvWriter(const std::string& path, std::uint64_t cfg_hash, const std::string& header)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
        out_ << "# config=" << hash_string(cfg_hash) << "\n" << header << "\n";
    }

    void row(std::span<const double> values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ",";
            out_ << format_g17(values[i]);
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

inline nlohmann::json state_to_json(const PhaseSpaceState& s) {
    nlohmann::json j;
    j["r_grid"] = s.r_grid;
    j["p_grid"] = s.p_grid;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < s.nr(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t jj = 0; jj < s.np(); ++jj) row.push_back(s.at(i, jj));
        rows.push_back(std::move(row));
    }
    j["f"] = std::move(rows);
    j["phi"] = s.phi;
    j["phi_t"] = s.phi_t;
    return j;
}

inline PhaseSpaceState state_from_json(const nlohmann::json& j) {
    PhaseSpaceState s;
    s.r_grid = j.at("r_grid").get<std::vector<double>>();
    s.p_grid = j.at("p_grid").get<std::vector<double>>();
    const auto& rows = j.at("f");
    if (!rows.is_array() || rows.size() != s.r_grid.size())
        throw std::invalid_argument("state_from_json: f must be a row-major 2-D array");
    s.f.reserve(s.r_grid.size() * s.p_grid.size());
    for (const auto& row : rows) {
        if (row.size() != s.p_grid.size())
            throw std::invalid_argument("state_from_json: ragged f rows");
        for (const auto& v : row) s.f.push_back(v.get<double>());
    }
    s.phi = j.at("phi").get<std::vector<double>>();
    if (j.contains("phi_t"))
        s.phi_t = j.at("phi_t").get<std::vector<double>>();
    else
        s.phi_t.assign(s.r_grid.size(), 0.0);
    s.validate();
    return s;
}

inline nlohmann::json report_to_json(const FunctionalReport& r) {
    return nlohmann::json{{"mass", r.mass},
                          {"e_kin", r.e_kin},
                          {"e_field", r.e_field},
                          {"e_field_t", r.e_field_t},
                          {"hamiltonian", r.hamiltonian},
                          {"lq_norm", r.lq_norm},
                          {"conformal", r.conformal},
                          {"conformal_truncated", r.conformal_truncated},
                          {"boundary_support", r.boundary_support},
                          {"q0", r.q0},
                          {"virial_lhs", r.virial_lhs},
                          {"virial_rhs", r.virial_rhs}};
}

inline nlohmann::json sweep_to_json(const SweepResult& res) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : res.rows)
        rows.push_back({{"a", r.a},
                        {"r0", r.r0},
                        {"dpsi_r0", r.dpsi_r0},
                        {"e0", r.e0},
                        {"scaled_mass", r.scaled_mass},
                        {"physical_mass", r.physical_mass}});
    nlohmann::json j;
    j["rows"] = std::move(rows);
    if (res.threshold) j["threshold"] = *res.threshold;
    j["violations"] = res.violations;
    return j;
}

inline nlohmann::json multiplier_report_to_json(const MultiplierReport& rep) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name},
                          {"measured", c.measured},
                          {"expected", c.expected},
                          {"rel_err", c.rel_err},
                          {"pass", c.pass}});
    return nlohmann::json{{"checks", std::move(checks)},
                          {"all_pass", rep.all_pass},
                          {"I", rep.I},
                          {"M", rep.M},
                          {"J", rep.J},
                          {"grad_phi_sq", rep.grad2}};
}

inline nlohmann::json minimizer_to_json(const MinimizerResult& res) {
    nlohmann::json j = state_to_json(res.state);
    j["kkt"] = {{"e0", res.kkt_e0},
                {"c", res.kkt_c},
                {"residual", res.kkt_residual},
                {"energy", res.energy},
                {"mass", res.mass},
                {"lq_norm", res.lq_norm},
                {"below_mass_threshold", res.below_mass_threshold},
                {"iterations", res.iterations}};
    return j;
}

inline void write_profile_csv(const std::string& path, std::uint64_t hash,
                              const ScaledProfile& p) {
    CsvWriter csv(path, hash, "r,psi,dpsi");
    for (std::size_t i = 0; i < p.r_nodes.size(); ++i)
        csv.row(std::vector<double>{p.r_nodes[i], p.psi[i], p.dpsi[i]});
}

inline nlohmann::json profile_to_json(const ScaledProfile& p) {
    nlohmann::json j;
    j["k"] = p.k;
    j["a"] = p.a;
    j["r"] = p.r_nodes;
    j["psi"] = p.psi;
    j["dpsi"] = p.dpsi;
    j["n_numeric"] = p.n_numeric;
    if (p.crossed()) {
        j["r0"] = *p.r0;
        j["dpsi_at_r0"] = p.dpsi_at_r0;
        j["v_inf"] = p.v_inf;
    }
    return j;
}

inline void write_physical_csv(const std::string& path, std::uint64_t hash,
                               const PhysicalProfile& phys,
                               const QuadratureConfig& qcfg = {}) {
    CsvWriter csv(path, hash, "r,phi,rho");
    for (std::size_t i = 0; i < phys.r_nodes.size(); ++i) {
        const double rho =
            physical_moment(phys.phi[i], phys.params, PhysicalMoment::Density, qcfg);
        csv.row(std::vector<double>{phys.r_nodes[i], phys.phi[i], rho});
    }
}

inline void write_sweep_csv(const std::string& path, std::uint64_t hash,
                            const SweepResult& res) {
    CsvWriter csv(path, hash, "a,r0,dpsi_r0,e0,scaled_mass,physical_mass");
    for (const auto& r : res.rows)
        csv.row(std::vector<double>{r.a, r.r0, r.dpsi_r0, r.e0, r.scaled_mass,
                                    r.physical_mass});
}

inline void write_trace_csv(const std::string& path, std::uint64_t hash,
                            const std::vector<TraceRow>& trace) {
    CsvWriter csv(path, hash, "iter,energy,kkt_residual");
    for (const auto& t : trace)
        csv.row(std::vector<double>{static_cast<double>(t.iter), t.energy,
                                    t.kkt_residual});
}

inline void write_dispersion_csv(const std::string& path, std::uint64_t hash,
                                 const DispersionReport& rep) {
    CsvWriter csv(path, hash, "t,ec,bound_quadratic,bound_linear,ok");
    for (const auto& r : rep.rows)
        csv.row(std::vector<double>{r.t, r.ec, r.bound_quadratic, r.bound_linear,
                                    r.ok ? 1.0 : 0.0});
}

inline void write_json(const std::string& path, std::uint64_t hash, nlohmann::json j) {
    j["config_hash"] = hash_string(hash);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

} // namespace nvpoly
