#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "talenti/error.hpp"
#include "talenti/fem.hpp"
#include "talenti/geometry.hpp"
#include "talenti/newton.hpp"

namespace talenti {

struct StageDiagnostics {
    double epsilon = 0.0;
    bool converged = false;
    int iterations = 0;
    int steepest_steps = 0;
    double residual = 0.0;
    double energy = 0.0;
    std::vector<double> energy_history;
};

struct SolveDiagnostics {
    std::vector<StageDiagnostics> stages;

    [[nodiscard]] double final_residual() const { return stages.empty() ? 0.0 : stages.back().residual; }
    [[nodiscard]] int total_iterations() const {
        int n = 0;
        for (const auto& s : stages) n += s.iterations;
        return n;
    }
};

struct StateSolution {
    Field field;
    SolveDiagnostics diagnostics;
};

namespace detail {

// PLaplaceEnergy bound to one regularisation length.
struct RegularisedEnergy {
    const PLaplaceEnergy& energy;
    double eps;

    [[nodiscard]] double value(const Eigen::VectorXd& x) const { return energy.value(x, eps); }
    [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return energy.gradient(x, eps); }
    [[nodiscard]] Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const {
        return energy.hessian(x, eps);
    }
};

inline NewtonOptions newton_options(const SolveParams& params) {
    NewtonOptions opt;
    opt.tol = params.newton_tol;
    opt.max_iters = params.max_newton_iters;
    opt.backtrack = params.line_search_factor;
    opt.max_backtracks = params.line_search_max_steps;
    return opt;
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Runs the epsilon continuation on `x` in place.
inline SolveDiagnostics minimise(const PLaplaceEnergy& energy, const SolveParams& params,
                                 const std::vector<double>& schedule, Eigen::VectorXd& x) {
    SolveDiagnostics diag;
    const auto opt = newton_options(params);
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const bool last = s + 1 == schedule.size();
        StageDiagnostics stage;
        stage.epsilon = schedule[s];
        try {
            const auto rep = newton_minimize(RegularisedEnergy{energy, schedule[s]}, x, opt);
            stage.converged = true;
            stage.iterations = rep.iterations;
            stage.steepest_steps = rep.steepest_steps;
            stage.residual = rep.residual;
            stage.energy = rep.energy;
            stage.energy_history = rep.energy_history;
        } catch (const ConvergenceError& e) {
            // intermediate stages only provide warm starts
            if (last)
                throw ConvergenceError("state solve failed at epsilon = " + std::to_string(schedule[s]),
                                       e.last_residual());
            stage.residual = e.last_residual();
            stage.energy = energy.value(x, schedule[s]);
        }
        diag.stages.push_back(std::move(stage));
    }
    return diag;
}

} // namespace detail

/// Minimises the regularised energy over the hole-constant space, running the
/// epsilon continuation warm-started from `initial` (zero when absent).
inline StateSolution solve_state(std::shared_ptr<const Mesh> mesh, const SolveParams& params,
                                 const SourceSpec& f, const std::optional<Field>& initial = std::nullopt,
                                 const std::optional<std::vector<double>>& schedule = std::nullopt) {
    params.validate();
    f.validate(*mesh);
    auto dofs = initial ? initial->dofs_ptr() : std::make_shared<const DofMap>(build_dof_map(*mesh));
    if (initial && !(initial->mesh() == *mesh)) throw ContractError("initial guess lives on another mesh");

    const PLaplaceEnergy energy(mesh, dofs, params.p, params.beta, f);
    Eigen::VectorXd x = initial ? detail::to_eigen(initial->dof_values()) : Eigen::VectorXd::Zero(dofs->free_count);
    auto diag = detail::minimise(energy, params, schedule.value_or(params.epsilon_schedule), x);
    return {Field(std::move(mesh), std::move(dofs), detail::to_std(x)), std::move(diag)};
}

struct HoleFlux {
    double flux = 0.0;   ///< discrete flux of |grad u|^{p-2} grad u through the hole interface
    double source = 0.0; ///< integral of f over the hole
};

/// Variationally consistent flux into hole `hole` (1-based): the stiffness part
/// of the energy gradient paired with the hole's indicator dof, minus the load
/// carried by the ring of bulk triangles around the hole.
inline HoleFlux hole_flux(const Field& field, const SolveParams& params, const SourceSpec& f, int hole) {
    const auto& mesh = field.mesh();
    if (hole < 1 || hole > mesh.hole_count())
        throw ParameterError("hole index " + std::to_string(hole) + " out of range 1.." +
                             std::to_string(mesh.hole_count()));
    f.validate(mesh);
    const PLaplaceEnergy energy(field.mesh_ptr(), field.dofs_ptr(), params.p, params.beta, f);
    const Eigen::VectorXd x = detail::to_eigen(field.dof_values());
    const Eigen::VectorXd stiff = energy.gradient(x, params.epsilon_min(), false);
    const int dof = field.dofs().hole_dofs[hole - 1];
    const double source = energy.load().region_total[hole];
    const double ring_load = energy.dof_load()[dof] - source;
    return {stiff[dof] - ring_load, source};
}

/// Weak-form residual (energy gradient at eps_min) of every dof.
inline Eigen::VectorXd weak_residual(const Field& field, const SolveParams& params, const SourceSpec& f) {
    const PLaplaceEnergy energy(field.mesh_ptr(), field.dofs_ptr(), params.p, params.beta, f);
    return energy.gradient(detail::to_eigen(field.dof_values()), params.epsilon_min());
}

/// L1 norm of the constant extension, i.e. the p-torsion when the field is
/// the state for f = 1. Exact for P1.
inline double torsion(const Field& field) {
    const auto& mesh = field.mesh();
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& v = mesh.triangles()[t].v;
        sum += mesh.area(t) * (field.nodal(v[0]) + field.nodal(v[1]) + field.nodal(v[2])) / 3.0;
    }
    return sum;
}

/// int |grad w|^p + beta int_ext |w|^p, unregularised.
inline double robin_dirichlet_energy(const Field& field, double p, double beta) {
    const PLaplaceEnergy energy(field.mesh_ptr(), field.dofs_ptr(), p, beta, SourceSpec::constant(0.0));
    const Eigen::VectorXd x = detail::to_eigen(field.dof_values());
    return p * energy.gradient_term(x, 0.0) + beta * energy.boundary_power(x);
}

/// (int w)^p / (int |grad w|^p + beta int_ext |w|^p)
inline double torsion_rayleigh(const Field& field, const SolveParams& params) {
    return std::pow(torsion(field), params.p) / robin_dirichlet_energy(field, params.p, params.beta);
}

/// int |w|^p by the edge-midpoint rule, the mass used by the eigen solver.
inline double midpoint_power_integral(const Field& field, double p) {
    const auto& mesh = field.mesh();
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& v = mesh.triangles()[t].v;
        double s = 0.0;
        for (int q = 0; q < 3; ++q)
            s += std::pow(std::abs(0.5 * (field.nodal(v[q]) + field.nodal(v[(q + 1) % 3]))), p);
        sum += mesh.area(t) / 3.0 * s;
    }
    return sum;
}

/// Discrete Robin Rayleigh quotient of a field.
inline double rayleigh_quotient(const Field& field, double p, double beta) {
    return robin_dirichlet_energy(field, p, beta) / midpoint_power_integral(field, p);
}

struct EigenSolution {
    double lambda = 0.0;
    Field field;                 ///< non-negative, unit L^p norm
    int iterations = 0;
    std::vector<double> history; ///< Rayleigh quotient after every Picard step
};

/// First Robin p-eigenpair over the hole-constant space by the inverse power
/// (Picard) scheme: u_{k+1} minimises F with source lambda_k u_k^{p-1}, then
/// is renormalised. Starts from u = 1 unless seeded.
inline EigenSolution solve_eigen(std::shared_ptr<const Mesh> mesh, const SolveParams& params,
                                 const std::optional<Field>& seed = std::nullopt) {
    params.validate();
    const double p = params.p;
    auto dofs = seed ? seed->dofs_ptr() : std::make_shared<const DofMap>(build_dof_map(*mesh));
    std::vector<double> start(dofs->free_count, 1.0);
    if (seed) {
        if (!(seed->mesh() == *mesh)) throw ContractError("seed lives on another mesh");
        start.assign(seed->dof_values().begin(), seed->dof_values().end());
        bool any = false;
        for (double v : start) {
            if (v < 0.0) throw ParameterError("eigen seed must be non-negative");
            any = any || v > 0.0;
        }
        if (!any) throw ParameterError("eigen seed must not vanish");
    }

    auto normalise = [&](std::vector<double> v) {
        const Field tmp(mesh, dofs, v);
        const double scale = std::pow(midpoint_power_integral(tmp, p), -1.0 / p);
        for (double& x : v) x *= scale;
        return Field(mesh, dofs, std::move(v));
    };

    Field u = normalise(std::move(start));
    double lambda = rayleigh_quotient(u, p, params.beta);
    EigenSolution out{lambda, u, 0, {lambda}};
    const std::vector<double> fine{params.epsilon_min()};

    for (int k = 1; k <= params.max_eigen_iters; ++k) {
        std::vector<double> samples(3 * mesh->triangle_count());
        for (std::size_t t = 0; t < mesh->triangle_count(); ++t) {
            const auto& v = mesh->triangles()[t].v;
            for (int q = 0; q < 3; ++q) {
                const double um = 0.5 * (u.nodal(v[q]) + u.nodal(v[(q + 1) % 3]));
                samples[3 * t + q] = lambda * std::pow(std::abs(um), p - 1.0);
            }
        }
        // the first step runs the full continuation, later ones start next to the answer
        auto next = solve_state(mesh, params, SourceSpec::samples(std::move(samples)), u,
                                k == 1 ? params.epsilon_schedule : fine);
        std::vector<double> w(next.field.dof_values().begin(), next.field.dof_values().end());
        for (double& x : w) x = std::max(x, 0.0);
        Field u_next = normalise(std::move(w));
        const double lambda_next = rayleigh_quotient(u_next, p, params.beta);
        out.history.push_back(lambda_next);
        if (lambda_next > lambda * (1.0 + 1e-6))
            throw DiagnosticError("Rayleigh quotient increased from " + std::to_string(lambda) + " to " +
                                  std::to_string(lambda_next) + " at Picard step " + std::to_string(k));
        const bool done = std::abs(lambda_next - lambda) <= params.newton_tol * lambda;
        u = std::move(u_next);
        lambda = lambda_next;
        if (done) {
            out.lambda = lambda;
            out.field = u;
            out.iterations = k;
            return out;
        }
    }
    throw ConvergenceError("eigen iteration did not converge",
                           std::abs(out.history.back() - out.history[out.history.size() - 2]) / lambda);
}

} // namespace talenti
