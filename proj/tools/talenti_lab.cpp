// talenti-lab: batch front end for the comparison pipeline.
//
//   talenti-lab run <scenario.json> [--out DIR] [--batch DIR] [--resolution k]
//   talenti-lab mesh <spec.json> --out mesh.txt
//   talenti-lab oracle <params.json> [--out DIR]
//
// Exit codes: 0 all checks pass, 2 a check failed, 3 configuration or
// hypothesis error, 4 convergence failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "talenti/talenti.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit : int { ok = 0, check_failed = 2, config_error = 3, convergence_error = 4 };

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw talenti::IoError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw talenti::ConfigError("", std::string("invalid JSON in '") + path + "': " + e.what());
    }
}

// Runs `body`, mapping library errors onto exit codes.
template <class F>
int guarded(const std::string& context, F&& body) {
    try {
        return body();
    } catch (const talenti::ConvergenceError& e) {
        std::cerr << context << ": convergence error: " << e.what() << '\n';
        return convergence_error;
    } catch (const talenti::DiagnosticError& e) {
        std::cerr << context << ": solver diagnostic: " << e.what() << '\n';
        return convergence_error;
    } catch (const talenti::HypothesisError& e) {
        std::cerr << context << ": hypothesis error: " << e.what() << '\n';
        return config_error;
    } catch (const talenti::ConfigError& e) {
        std::cerr << context << ": configuration error at " << e.what() << '\n';
        return config_error;
    } catch (const talenti::Error& e) {
        std::cerr << context << ": " << e.what() << '\n';
        return config_error;
    }
}

int run_one(const std::string& path, const fs::path& out_dir, std::optional<int> resolution) {
    return guarded(path, [&] {
        auto scenario = talenti::parse_scenario_file(path);
        if (resolution) scenario.domain.resolution = {8 * *resolution, 32 * *resolution};
        const auto result = talenti::run_scenario(scenario);
        talenti::emit_report(result, scenario.outputs, out_dir);
        const auto& recs = result.report.records;
        const auto asserting = std::count_if(recs.begin(), recs.end(), [](const auto& r) { return r.asserting; });
        if (result.report.all_pass()) {
            std::cout << scenario.name << ": PASS (" << asserting << " checks)\n";
            return static_cast<int>(ok);
        }
        std::cout << scenario.name << ": FAIL";
        for (const auto& r : recs)
            if (r.asserting && !r.pass) std::cout << ' ' << r.name << (r.k ? "[k=" + std::to_string(*r.k) + "]" : "");
        std::cout << '\n';
        return static_cast<int>(check_failed);
    });
}

int cmd_run(const std::string& scenario, const std::string& batch, const std::string& out,
            std::optional<int> resolution) {
    std::vector<std::string> files;
    if (!scenario.empty()) files.push_back(scenario);
    if (!batch.empty()) {
        std::error_code ec;
        for (const auto& e : fs::directory_iterator(batch, ec))
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path().string());
        if (ec) {
            std::cerr << batch << ": " << ec.message() << '\n';
            return config_error;
        }
        std::sort(files.begin() + (scenario.empty() ? 0 : 1), files.end());
    }
    if (files.empty()) {
        std::cerr << "run: no scenario given\n";
        return config_error;
    }
    int code = ok;
    for (const auto& f : files) code = std::max(code, run_one(f, out, resolution));
    return code;
}

int cmd_mesh(const std::string& spec, const std::string& out) {
    return guarded(spec, [&] {
        const json j = read_json(spec);
        const auto domain = talenti::parse_domain(j, "", fs::path(spec).parent_path());
        const auto mesh = talenti::build_mesh(domain);
        talenti::export_mesh(mesh, out);
        std::cout << out << ": " << mesh.vertex_count() << " vertices, " << mesh.triangle_count() << " triangles, "
                  << mesh.hole_count() << " holes\n";
        return static_cast<int>(ok);
    });
}

talenti::FStarSpec parse_fstar(const json& j, const std::string& ptr) {
    using talenti::ConfigError;
    if (!j.is_object() || !j.contains("kind")) throw ConfigError(ptr, "expected an object with a kind");
    const auto kind = j["kind"];
    if (kind == "constant") {
        talenti::detail::require_object(j, ptr, {"kind", "value"});
        return talenti::FStarSpec::constant(
            talenti::detail::get_number(talenti::detail::require_key(j, ptr, "value"), ptr + "/value"));
    }
    if (kind == "table") {
        talenti::detail::require_object(j, ptr, {"kind", "knots"});
        const auto& k = talenti::detail::require_key(j, ptr, "knots");
        if (!k.is_array()) throw ConfigError(ptr + "/knots", "expected an array of [s, value] pairs");
        std::vector<std::pair<double, double>> knots;
        for (std::size_t i = 0; i < k.size(); ++i) {
            const auto row = talenti::detail::get_numbers(k[i], ptr + "/knots/" + std::to_string(i));
            if (row.size() != 2) throw ConfigError(ptr + "/knots/" + std::to_string(i), "expected [s, value]");
            knots.emplace_back(row[0], row[1]);
        }
        try {
            return talenti::FStarSpec::table(std::move(knots));
        } catch (const talenti::ParameterError& e) {
            throw ConfigError(ptr + "/knots", e.what());
        }
    }
    throw ConfigError(ptr + "/kind", "unknown f* kind");
}

int cmd_oracle(const std::string& params, const std::string& out) {
    return guarded(params, [&] {
        using namespace talenti::detail;
        const json j = read_json(params);
        require_object(j, "", {"name", "n", "p", "beta", "R0", "R1", "source", "grid", "eigen", "eigen_grid"});
        const std::string name = j.contains("name") ? get_string(j["name"], "/name") : "oracle";
        const int n = j.contains("n") ? static_cast<int>(get_integer(j["n"], "/n")) : 2;
        const double p = get_number(require_key(j, "", "p"), "/p");
        const double beta = j.contains("beta") ? get_number(j["beta"], "/beta") : 1.0;
        const double R0 = get_number(require_key(j, "", "R0"), "/R0");
        const double R1 = j.contains("R1") ? get_number(j["R1"], "/R1") : 0.0;
        const auto fstar = j.contains("source") ? parse_fstar(j["source"], "/source") : talenti::FStarSpec::constant(1.0);
        const auto grid = j.contains("grid") ? static_cast<std::size_t>(get_integer(j["grid"], "/grid")) : 4096;
        if (j.contains("grid") && get_integer(j["grid"], "/grid") < 3)
            throw talenti::ConfigError("/grid", "grid must have at least 3 points");
        if (j.contains("eigen_grid") && get_integer(j["eigen_grid"], "/eigen_grid") < 2)
            throw talenti::ConfigError("/eigen_grid", "eigen grid must have at least 2 elements");
        if (j.contains("eigen") && !j["eigen"].is_boolean()) throw talenti::ConfigError("/eigen", "expected a boolean");
        const bool eigen = j.contains("eigen") && j["eigen"].get<bool>();
        const auto egrid =
            j.contains("eigen_grid") ? static_cast<std::size_t>(get_integer(j["eigen_grid"], "/eigen_grid")) : 1024;

        const auto prof = talenti::solve_radial(n, p, beta, R0, R1, fstar, grid);
        const auto phi = talenti::radial_distribution(prof);
        json summary = {{"name", name},          {"c_bar", prof.c_bar}, {"v_boundary", prof.v_boundary},
                        {"v_m", prof.v_m},       {"l1_norm", phi.integral()}};
        if (eigen) summary["lambda"] = talenti::solve_radial_eigen(n, p, beta, R0, R1, egrid).lambda;
        std::cout << summary.dump(2) << '\n';
        if (!out.empty()) {
            talenti::ScenarioResult res{{}, phi, prof};
            res.report.scenario = name;
            talenti::emit_report(res, {talenti::OutputKind::profile_csv, talenti::OutputKind::mu_csv}, out);
        }
        return static_cast<int>(ok);
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"p-Laplace comparison laboratory"};
    app.require_subcommand(1);

    std::string scenario, batch, out_dir = "out";
    std::optional<int> resolution;
    auto* run = app.add_subcommand("run", "run a scenario (or a directory of scenarios)");
    run->add_option("scenario", scenario, "scenario JSON file")->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "output directory")->capture_default_str();
    run->add_option("--batch", batch, "directory of scenario JSON files")->check(CLI::ExistingDirectory);
    run->add_option("--resolution", resolution, "mesh resolution level k, giving (8k, 32k) cells")
        ->check(CLI::PositiveNumber);

    std::string mesh_spec, mesh_out;
    auto* mesh = app.add_subcommand("mesh", "generate a mesh from a domain description");
    mesh->add_option("spec", mesh_spec, "domain JSON file")->required()->check(CLI::ExistingFile);
    mesh->add_option("--out", mesh_out, "MESH v1 output path")->required();

    std::string oracle_params, oracle_out;
    auto* oracle = app.add_subcommand("oracle", "tables of the radial symmetrised solution");
    oracle->add_option("params", oracle_params, "oracle parameter JSON file")->required()->check(CLI::ExistingFile);
    oracle->add_option("--out", oracle_out, "directory for the profile and distribution CSV files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(config_error);
    }

    if (*run) return cmd_run(scenario, batch, out_dir, resolution);
    if (*mesh) return cmd_mesh(mesh_spec, mesh_out);
    return cmd_oracle(oracle_params, oracle_out);
}
