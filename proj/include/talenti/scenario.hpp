#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "talenti/comparison.hpp"
#include "talenti/error.hpp"
#include "talenti/fem.hpp"
#include "talenti/geometry.hpp"
#include "talenti/mesh_io.hpp"
#include "talenti/plaplace.hpp"
#include "talenti/radial.hpp"
#include "talenti/rearrangement.hpp"

namespace talenti {

enum class OutputKind { report_json, report_csv, mu_csv, profile_csv };

inline std::string to_string(OutputKind o) {
    switch (o) {
    case OutputKind::report_json: return "report_json";
    case OutputKind::report_csv: return "report_csv";
    case OutputKind::mu_csv: return "mu_csv";
    case OutputKind::profile_csv: return "profile_csv";
    }
    return "?";
}

struct Scenario {
    std::string name;
    DomainSpec domain;
    double p = 2.0;
    int n = 2;
    double beta = 1.0;
    SourceSpec source = SourceSpec::constant(1.0);
    std::vector<CheckKind> checks;
    std::optional<std::vector<double>> kgrid; ///< nullopt: automatic grid per check
    SolveParams solver;
    std::vector<OutputKind> outputs{OutputKind::report_json, OutputKind::report_csv};
    std::size_t radial_grid = 4096;
    std::size_t eigen_grid = 1024;

    [[nodiscard]] bool has(CheckKind c) const { return std::find(checks.begin(), checks.end(), c) != checks.end(); }
};

namespace detail {

using nlohmann::json;

inline std::string child(const std::string& ptr, const std::string& key) {
    std::string k;
    for (char c : key) {
        if (c == '~')
            k += "~0";
        else if (c == '/')
            k += "~1";
        else
            k += c;
    }
    return ptr + "/" + k;
}

inline std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

inline void require_object(const json& j, const std::string& ptr, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "expected an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key)) throw ConfigError(child(ptr, key), "unknown key '" + key + "'");
}

inline const json& require_key(const json& j, const std::string& ptr, const std::string& key) {
    if (!j.contains(key)) throw ConfigError(child(ptr, key), "missing required key '" + key + "'");
    return j.at(key);
}

inline double get_number(const json& j, const std::string& ptr) {
    if (!j.is_number()) throw ConfigError(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
    return v;
}

inline long long get_integer(const json& j, const std::string& ptr) {
    if (!j.is_number_integer()) throw ConfigError(ptr, "expected an integer");
    return j.get<long long>();
}

inline std::string get_string(const json& j, const std::string& ptr) {
    if (!j.is_string()) throw ConfigError(ptr, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> get_numbers(const json& j, const std::string& ptr) {
    if (!j.is_array()) throw ConfigError(ptr, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], child(ptr, i)));
    return out;
}

inline Resolution parse_resolution(const json& j, const std::string& ptr) {
    require_object(j, ptr, {"n_radial", "n_angular"});
    Resolution r;
    if (j.contains("n_radial")) r.n_radial = static_cast<int>(get_integer(j["n_radial"], child(ptr, "n_radial")));
    if (j.contains("n_angular"))
        r.n_angular = static_cast<int>(get_integer(j["n_angular"], child(ptr, "n_angular")));
    if (r.n_radial < 2) throw ConfigError(child(ptr, "n_radial"), "n_radial must be at least 2");
    if (r.n_angular < 8) throw ConfigError(child(ptr, "n_angular"), "n_angular must be at least 8");
    return r;
}

} // namespace detail

/// Strict DomainSpec reader; relative mesh paths resolve against `base_dir`.
inline DomainSpec parse_domain(const nlohmann::json& j, const std::string& ptr,
                               const std::filesystem::path& base_dir = {}) {
    using namespace detail;
    require_object(j, ptr, {"kind", "R0", "R1", "d", "mesh_path", "resolution"});
    DomainSpec d;
    const std::string kind = get_string(require_key(j, ptr, "kind"), child(ptr, "kind"));
    if (kind == "disk")
        d.kind = DomainKind::disk;
    else if (kind == "concentric_annulus")
        d.kind = DomainKind::concentric_annulus;
    else if (kind == "eccentric_annulus")
        d.kind = DomainKind::eccentric_annulus;
    else if (kind == "external_mesh")
        d.kind = DomainKind::external_mesh;
    else
        throw ConfigError(child(ptr, "kind"), "unknown domain kind '" + kind + "'");

    if (j.contains("resolution")) d.resolution = parse_resolution(j["resolution"], child(ptr, "resolution"));
    if (d.kind == DomainKind::external_mesh) {
        std::filesystem::path path = get_string(require_key(j, ptr, "mesh_path"), child(ptr, "mesh_path"));
        if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
        d.mesh_path = path.string();
        return d;
    }
    d.R0 = get_number(require_key(j, ptr, "R0"), child(ptr, "R0"));
    if (!(d.R0 > 0.0)) throw ConfigError(child(ptr, "R0"), "R0 must be positive");
    if (d.kind == DomainKind::disk) return d;
    d.R1 = get_number(require_key(j, ptr, "R1"), child(ptr, "R1"));
    if (!(d.R1 > 0.0) || !(d.R1 < d.R0)) throw ConfigError(child(ptr, "R1"), "R1 must satisfy 0 < R1 < R0");
    if (d.kind == DomainKind::eccentric_annulus) {
        d.d = get_number(require_key(j, ptr, "d"), child(ptr, "d"));
        if (!(d.d >= 0.0) || !(d.d + d.R1 < d.R0))
            throw ConfigError(child(ptr, "d"), "offset must satisfy 0 <= d < R0 - R1");
    }
    return d;
}

inline SourceSpec parse_source(const nlohmann::json& j, const std::string& ptr) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError(ptr, "expected an object");
    const std::string kind = get_string(require_key(j, ptr, "kind"), child(ptr, "kind"));
    if (kind == "constant") {
        require_object(j, ptr, {"kind", "value"});
        const double v = get_number(require_key(j, ptr, "value"), child(ptr, "value"));
        if (!(v >= 0.0)) throw ConfigError(child(ptr, "value"), "source must be non-negative");
        return SourceSpec::constant(v);
    }
    if (kind == "radial_profile") {
        require_object(j, ptr, {"kind", "centre", "table"});
        Point2 c{0.0, 0.0};
        if (j.contains("centre")) {
            const auto xy = get_numbers(j["centre"], child(ptr, "centre"));
            if (xy.size() != 2) throw ConfigError(child(ptr, "centre"), "centre needs two coordinates");
            c = {xy[0], xy[1]};
        }
        const auto& t = require_key(j, ptr, "table");
        const std::string tp = child(ptr, "table");
        if (!t.is_array() || t.empty()) throw ConfigError(tp, "expected a non-empty array of [r, value] pairs");
        std::vector<std::pair<double, double>> table;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto row = get_numbers(t[i], child(tp, i));
            if (row.size() != 2) throw ConfigError(child(tp, i), "expected [r, value]");
            if (!(row[1] >= 0.0)) throw ConfigError(child(tp, i), "source must be non-negative");
            if (i > 0 && !(row[0] > table.back().first)) throw ConfigError(child(tp, i), "radii must increase");
            table.emplace_back(row[0], row[1]);
        }
        return SourceSpec::radial_profile(c, std::move(table));
    }
    if (kind == "per_triangle") {
        require_object(j, ptr, {"kind", "values"});
        auto v = get_numbers(require_key(j, ptr, "values"), child(ptr, "values"));
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!(v[i] >= 0.0)) throw ConfigError(child(child(ptr, "values"), i), "source must be non-negative");
        return SourceSpec::per_triangle(std::move(v));
    }
    throw ConfigError(child(ptr, "kind"), "unknown source kind '" + kind + "'");
}

inline SolveParams parse_solver(const nlohmann::json& j, const std::string& ptr, SolveParams s) {
    using namespace detail;
    require_object(j, ptr,
                   {"epsilon_schedule", "newton_tol", "max_newton_iters", "line_search_factor",
                    "line_search_max_steps", "max_eigen_iters"});
    if (j.contains("epsilon_schedule")) {
        s.epsilon_schedule = get_numbers(j["epsilon_schedule"], child(ptr, "epsilon_schedule"));
        if (s.epsilon_schedule.empty())
            throw ConfigError(child(ptr, "epsilon_schedule"), "schedule must not be empty");
        for (std::size_t i = 0; i < s.epsilon_schedule.size(); ++i)
            if (!(s.epsilon_schedule[i] > 0.0))
                throw ConfigError(child(child(ptr, "epsilon_schedule"), i), "epsilon must be positive");
    }
    if (j.contains("newton_tol")) {
        s.newton_tol = get_number(j["newton_tol"], child(ptr, "newton_tol"));
        if (!(s.newton_tol > 0.0)) throw ConfigError(child(ptr, "newton_tol"), "tolerance must be positive");
    }
    auto positive_int = [&](const char* key, int& out) {
        if (!j.contains(key)) return;
        const long long v = get_integer(j[key], child(ptr, key));
        if (v < 1) throw ConfigError(child(ptr, key), "must be a positive integer");
        out = static_cast<int>(v);
    };
    positive_int("max_newton_iters", s.max_newton_iters);
    positive_int("line_search_max_steps", s.line_search_max_steps);
    positive_int("max_eigen_iters", s.max_eigen_iters);
    if (j.contains("line_search_factor")) {
        s.line_search_factor = get_number(j["line_search_factor"], child(ptr, "line_search_factor"));
        if (!(s.line_search_factor > 0.0 && s.line_search_factor < 1.0))
            throw ConfigError(child(ptr, "line_search_factor"), "factor must lie in (0, 1)");
    }
    return s;
}

/// Validates the hypotheses of every selected check; throws HypothesisError.
inline void check_hypotheses(const Scenario& s) {
    const bool unit = s.source.is_constant(1.0);
    for (CheckKind c : s.checks) {
        HypothesisInput in{s.p, s.n, unit, {}};
        if ((c == CheckKind::thm1 || c == CheckKind::thm2ii) && s.kgrid) in.k = *s.kgrid;
        require_hypothesis(c, in);
    }
}

inline Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    using namespace detail;
    require_object(j, "",
                   {"name", "domain", "p", "n", "beta", "source", "checks", "kgrid", "solver", "outputs",
                    "radial_grid", "eigen_grid"});
    Scenario s;
    s.name = get_string(require_key(j, "", "name"), "/name");
    if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError("/name", "name must be a non-empty identifier without path separators");
    s.domain = parse_domain(require_key(j, "", "domain"), "/domain", base_dir);

    s.p = get_number(require_key(j, "", "p"), "/p");
    if (!(s.p > 1.0)) throw ConfigError("/p", "p > 1 required");
    if (s.p > 10.0) throw ConfigError("/p", "p <= 10 required");
    if (j.contains("n")) {
        s.n = static_cast<int>(get_integer(j["n"], "/n"));
        if (s.n != 2) throw ConfigError("/n", "finite element scenarios are two-dimensional (n = 2)");
    }
    if (j.contains("beta")) {
        s.beta = get_number(j["beta"], "/beta");
        if (!(s.beta > 0.0)) throw ConfigError("/beta", "beta must be positive");
    }
    if (j.contains("source")) s.source = parse_source(j["source"], "/source");

    const auto& checks = require_key(j, "", "checks");
    if (!checks.is_array()) throw ConfigError("/checks", "expected an array of check selectors");
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto ptr = child("/checks", i);
        const auto name = get_string(checks[i], ptr);
        const auto c = check_kind_from_string(name);
        if (!c) throw ConfigError(ptr, "unknown check '" + name + "'");
        if (!s.has(*c)) s.checks.push_back(*c);
    }

    if (j.contains("kgrid")) {
        const auto& k = j["kgrid"];
        if (k.is_string()) {
            if (k.get<std::string>() != "auto") throw ConfigError("/kgrid", "expected \"auto\" or an array");
        } else {
            s.kgrid = get_numbers(k, "/kgrid");
            if (s.kgrid->empty()) throw ConfigError("/kgrid", "k grid must not be empty");
        }
    }

    s.solver.p = s.p;
    s.solver.beta = s.beta;
    if (j.contains("solver")) s.solver = parse_solver(j["solver"], "/solver", s.solver);

    if (j.contains("outputs")) {
        const auto& o = j["outputs"];
        if (!o.is_array()) throw ConfigError("/outputs", "expected an array");
        s.outputs.clear();
        for (std::size_t i = 0; i < o.size(); ++i) {
            const auto ptr = child("/outputs", i);
            const auto name = get_string(o[i], ptr);
            bool found = false;
            for (auto k : {OutputKind::report_json, OutputKind::report_csv, OutputKind::mu_csv, OutputKind::profile_csv})
                if (to_string(k) == name) {
                    if (std::find(s.outputs.begin(), s.outputs.end(), k) == s.outputs.end()) s.outputs.push_back(k);
                    found = true;
                }
            if (!found) throw ConfigError(ptr, "unknown output '" + name + "'");
        }
    }
    auto grid = [&](const char* key, std::size_t& out, long long min) {
        if (!j.contains(key)) return;
        const long long v = get_integer(j[key], std::string("/") + key);
        if (v < min) throw ConfigError(std::string("/") + key, "grid must have at least " + std::to_string(min) + " points");
        out = static_cast<std::size_t>(v);
    };
    grid("radial_grid", s.radial_grid, 3);
    grid("eigen_grid", s.eigen_grid, 2);

    check_hypotheses(s);
    return s;
}

inline Scenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON in '") + path + "': " + e.what());
    }
    return parse_scenario(j, std::filesystem::path(path).parent_path());
}

struct ScenarioResult {
    ComparisonReport report;
    DistributionFunction mu;
    RadialProfile profile;
};

/// Mesh, state, symmetrised profile and every selected check.
inline ScenarioResult run_scenario(const Scenario& s) {
    check_hypotheses(s);
    auto mesh = std::make_shared<const Mesh>(build_mesh(s.domain));
    s.source.validate(*mesh);
    const auto metrics = region_metrics(*mesh);
    const auto state = solve_state(mesh, s.solver, s.source);
    const auto fstar = FStarSpec::from_source(*mesh, s.source);
    auto profile = solve_radial(s.n, s.p, s.beta, metrics.outer_radius_sharp, metrics.hole_radius_sharp, fstar,
                                s.radial_grid);

    const LoadData load = assemble_load(*mesh, s.source);
    const double source_total = load.total();
    const double bulk_total = load.region_total[0];
    const double mean_source = source_total / metrics.area_total;
    const double fem_error = estimate_fem_error(metrics.outer_radius_sharp, metrics.hole_radius_sharp, s.solver,
                                                mean_source, s.domain.resolution, s.radial_grid);
    const Tolerance tol = Tolerance::from_fem_error(fem_error);

    auto mu = distribution_function_p1(state.field);
    const auto phi = radial_distribution(profile);
    const bool unit = s.source.is_constant(1.0);

    ComparisonReport rep;
    rep.scenario = s.name;
    rep.n_radial = s.domain.resolution.n_radial;
    rep.n_angular = s.domain.resolution.n_angular;
    rep.state_residual = state.diagnostics.final_residual();
    rep.fem_error = fem_error;
    rep.append(verify_hole_fluxes(state.field, s.solver, s.source));

    auto grid_for = [&](double k_max) {
        if (!s.kgrid) return KGrid::automatic(k_max);
        return KGrid{*s.kgrid, k_max};
    };
    for (CheckKind c : s.checks) {
        switch (c) {
        case CheckKind::thm1:
            rep.append(verify_lorentz_comparisons(mu, phi, s.p, s.n, grid_for(k_max_general(s.p, s.n)),
                                                  LorentzCheck::thm1, tol, unit));
            break;
        case CheckKind::cor12:
            rep.append(verify_lorentz_comparisons(mu, phi, s.p, s.n, {}, LorentzCheck::cor12, tol, unit));
            break;
        case CheckKind::thm2i: rep.append(verify_pointwise(mu, phi, s.p, s.n, tol, unit)); break;
        case CheckKind::thm2ii:
            rep.append(verify_lorentz_comparisons(mu, phi, s.p, s.n, grid_for(k_max_unit_source(s.p, s.n)),
                                                  LorentzCheck::thm2ii, tol, unit));
            break;
        case CheckKind::diffineq:
            rep.append(verify_differential_inequality(state.field, s.p, s.n, s.beta, fstar, source_total, bulk_total,
                                                      tol));
            break;
        case CheckKind::torsion:
        case CheckKind::eigen: break;
        }
    }
    if (s.has(CheckKind::torsion) || s.has(CheckKind::eigen)) {
        auto opt = verify_optimality(mesh, s.solver, s.n, tol, fem_error, s.has(CheckKind::eigen), s.radial_grid,
                                     s.eigen_grid);
        if (!s.has(CheckKind::torsion))
            std::erase_if(opt.records, [](const CheckRecord& r) { return r.name.starts_with("torsion."); });
        rep.append(std::move(opt.records));
    }
    rep.sort();
    return {std::move(rep), std::move(mu), std::move(profile)};
}

namespace detail {

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline nlohmann::json optional_json(const std::optional<double>& x) {
    return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
}

} // namespace detail

inline nlohmann::json report_to_json(const ComparisonReport& rep) {
    nlohmann::json j;
    j["scenario"] = rep.scenario;
    j["all_pass"] = rep.all_pass();
    j["provenance"] = {{"n_radial", rep.n_radial},
                       {"n_angular", rep.n_angular},
                       {"state_residual", rep.state_residual},
                       {"fem_error", rep.fem_error}};
    auto& recs = j["records"] = nlohmann::json::array();
    for (const auto& r : rep.records) {
        recs.push_back({{"name", r.name},
                        {"anchor", r.anchor},
                        {"hypothesis", r.hypothesis},
                        {"k", detail::optional_json(r.k)},
                        {"t", detail::optional_json(r.t)},
                        {"left", r.left},
                        {"right", r.right},
                        {"margin", r.margin},
                        {"abs_tol", r.abs_tol},
                        {"rel_tol", r.rel_tol},
                        {"asserting", r.asserting},
                        {"pass", r.pass},
                        {"note", r.note}});
    }
    return j;
}

inline ComparisonReport report_from_json(const nlohmann::json& j) {
    ComparisonReport rep;
    rep.scenario = j.at("scenario").get<std::string>();
    const auto& prov = j.at("provenance");
    rep.n_radial = prov.at("n_radial").get<int>();
    rep.n_angular = prov.at("n_angular").get<int>();
    rep.state_residual = prov.at("state_residual").get<double>();
    rep.fem_error = prov.at("fem_error").get<double>();
    for (const auto& r : j.at("records")) {
        CheckRecord c;
        c.name = r.at("name").get<std::string>();
        c.anchor = r.at("anchor").get<std::string>();
        c.hypothesis = r.at("hypothesis").get<std::string>();
        if (!r.at("k").is_null()) c.k = r.at("k").get<double>();
        if (!r.at("t").is_null()) c.t = r.at("t").get<double>();
        c.left = r.at("left").get<double>();
        c.right = r.at("right").get<double>();
        c.margin = r.at("margin").get<double>();
        c.abs_tol = r.at("abs_tol").get<double>();
        c.rel_tol = r.at("rel_tol").get<double>();
        c.asserting = r.at("asserting").get<bool>();
        c.pass = r.at("pass").get<bool>();
        c.note = r.at("note").get<std::string>();
        rep.records.push_back(std::move(c));
    }
    return rep;
}

inline void write_report_csv(const ComparisonReport& rep, std::ostream& out) {
    using detail::format_double;
    out << "scenario,check,k,t,left,right,margin,pass\n";
    for (const auto& r : rep.records) {
        out << rep.scenario << ',' << r.name << ',' << (r.k ? format_double(*r.k) : "") << ','
            << (r.t ? format_double(*r.t) : "") << ',' << format_double(r.left) << ',' << format_double(r.right)
            << ',' << format_double(r.margin) << ',' << (r.pass ? "true" : "false") << '\n';
    }
}

/// (t, mu(t)) at every breakpoint.
inline void write_mu_csv(const DistributionFunction& mu, std::ostream& out) {
    out << "t,mu\n";
    for (double t : mu.breakpoints()) out << detail::format_double(t) << ',' << detail::format_double(mu(t)) << '\n';
}

inline void write_profile_csv(const RadialProfile& prof, std::ostream& out) {
    out << "r,v\n";
    for (std::size_t i = 0; i < prof.r.size(); ++i)
        out << detail::format_double(prof.r[i]) << ',' << detail::format_double(prof.v[i]) << '\n';
}

/// Writes the requested artifacts into `dir` as <scenario>.<ext>; returns the paths written.
inline std::vector<std::filesystem::path> emit_report(const ScenarioResult& res, const std::vector<OutputKind>& outputs,
                                                      const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::vector<std::filesystem::path> written;
    const std::string& name = res.report.scenario;
    auto open = [&](const std::string& file) {
        const auto path = dir / file;
        std::ofstream out(path);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        written.push_back(path);
        return out;
    };
    auto finish = [&](std::ofstream& out) {
        out.flush();
        if (!out) throw IoError("failed while writing '" + written.back().string() + "'");
    };
    for (OutputKind o : outputs) {
        switch (o) {
        case OutputKind::report_json: {
            auto out = open(name + ".report.json");
            out << report_to_json(res.report).dump(2) << '\n';
            finish(out);
            break;
        }
        case OutputKind::report_csv: {
            auto out = open(name + ".report.csv");
            write_report_csv(res.report, out);
            finish(out);
            break;
        }
        case OutputKind::mu_csv: {
            auto out = open(name + ".mu.csv");
            write_mu_csv(res.mu, out);
            finish(out);
            break;
        }
        case OutputKind::profile_csv: {
            auto out = open(name + ".profile.csv");
            write_profile_csv(res.profile, out);
            finish(out);
            break;
        }
        }
    }
    return written;
}

} // namespace talenti
