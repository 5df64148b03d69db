#pragma once

#include <cmath>
#include <concepts>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "talenti/error.hpp"

namespace talenti {

/// A smooth convex objective with sparse Hessian, evaluated at fixed regularisation.
template <class P>
concept SmoothObjective = requires(const P& p, const Eigen::VectorXd& x) {
    { p.value(x) } -> std::convertible_to<double>;
    { p.gradient(x) } -> std::convertible_to<Eigen::VectorXd>;
    { p.hessian(x) } -> std::convertible_to<Eigen::SparseMatrix<double>>;
};

struct NewtonOptions {
    double tol = 1e-10;          ///< stop when |grad| <= tol * (1 + |F|)
    int max_iters = 100;
    double backtrack = 0.5;
    int max_backtracks = 30;
    double armijo = 1e-4;
};

struct NewtonReport {
    int iterations = 0;
    int steepest_steps = 0;
    double residual = 0.0;
    double energy = 0.0;
    std::vector<double> energy_history; ///< F at every accepted iterate, starting with x0
};

/// Damped Newton with Armijo backtracking; falls back to steepest descent
/// when the Newton direction is not a descent direction or the factorisation fails.
template <SmoothObjective P>
NewtonReport newton_minimize(const P& problem, Eigen::VectorXd& x, const NewtonOptions& opt) {
    NewtonReport rep;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    bool analysed = false;

    double f = problem.value(x);
    Eigen::VectorXd g = problem.gradient(x);
    rep.energy_history.push_back(f);

    for (int it = 0;; ++it) {
        rep.residual = g.norm();
        rep.energy = f;
        rep.iterations = it;
        if (rep.residual <= opt.tol * (1.0 + std::abs(f))) return rep;
        if (it >= opt.max_iters) throw ConvergenceError("Newton iteration did not converge", rep.residual);

        Eigen::VectorXd d;
        bool newton_dir = false;
        {
            const Eigen::SparseMatrix<double> h = problem.hessian(x);
            if (!analysed) {
                solver.analyzePattern(h);
                analysed = true;
            }
            solver.factorize(h);
            if (solver.info() == Eigen::Success) {
                d = solver.solve(-g);
                newton_dir = solver.info() == Eigen::Success && d.allFinite() && g.dot(d) < 0.0;
            }
        }
        if (!newton_dir) {
            d = -g;
            ++rep.steepest_steps;
        }

        auto line_search = [&](const Eigen::VectorXd& dir, Eigen::VectorXd& x_new, double& f_new) {
            const double slope = g.dot(dir);
            double alpha = 1.0;
            for (int k = 0; k < opt.max_backtracks; ++k) {
                x_new = x + alpha * dir;
                f_new = problem.value(x_new);
                if (std::isfinite(f_new) && f_new <= f + opt.armijo * alpha * slope) return true;
                alpha *= opt.backtrack;
            }
            return false;
        };

        Eigen::VectorXd x_new;
        double f_new = 0.0;
        bool accepted = false;
        const double noise = 1e-13 * (1.0 + std::abs(f));
        if (newton_dir && std::abs(g.dot(d)) <= 1e3 * noise) {
            // The predicted decrease is below the resolution of F, so Armijo
            // tests only see rounding; accept the full step if it shrinks the
            // gradient without increasing F beyond rounding.
            const Eigen::VectorXd x_full = x + d;
            const double f_full = problem.value(x_full);
            if (f_full <= f + noise && problem.gradient(x_full).norm() < rep.residual) {
                x_new = x_full;
                f_new = f_full;
                accepted = true;
            }
        }
        if (!accepted) accepted = line_search(d, x_new, f_new);
        if (!accepted && newton_dir) {
            ++rep.steepest_steps;
            accepted = line_search(-g, x_new, f_new);
        }
        if (!accepted) throw ConvergenceError("line search failed", rep.residual);

        x = std::move(x_new);
        f = f_new;
        g = problem.gradient(x);
        rep.energy_history.push_back(f);
    }
}

} // namespace talenti
