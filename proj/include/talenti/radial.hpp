#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "talenti/error.hpp"
#include "talenti/fem.hpp"
#include "talenti/geometry.hpp"
#include "talenti/newton.hpp"
#include "talenti/quadrature.hpp"
#include "talenti/rearrangement.hpp"

namespace talenti {

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

/// gamma_n = (n omega_n^{1/n})^{p/(p-1)}, the isoperimetric constant of the
/// level-set inequality in measure form.
inline double isoperimetric_constant(int n, double p) {
    return std::pow(n * std::pow(unit_ball_volume(n), 1.0 / n), p / (p - 1.0));
}

/// Decreasing rearrangement f* on (0, extent): a constant, or a non-increasing
/// piecewise-linear table whose knots may repeat an abscissa to encode a step.
class FStarSpec {
public:
    static FStarSpec constant(double c) {
        if (!(c >= 0.0) || !std::isfinite(c)) throw ParameterError("f* must be non-negative");
        FStarSpec f;
        f.constant_ = c;
        return f;
    }

    static FStarSpec table(std::vector<std::pair<double, double>> knots) {
        if (knots.size() < 2) throw ParameterError("f* table needs at least two knots");
        if (knots.front().first != 0.0) throw ParameterError("f* table must start at s = 0");
        for (std::size_t i = 0; i < knots.size(); ++i) {
            const auto [s, y] = knots[i];
            if (!(y >= 0.0) || !std::isfinite(y) || !std::isfinite(s))
                throw ParameterError("f* must be non-negative and finite");
            if (i > 0 && (s < knots[i - 1].first || y > knots[i - 1].second))
                throw ParameterError("f* table must have non-decreasing s and non-increasing values");
        }
        if (!(knots.back().first > 0.0)) throw ParameterError("f* table has zero extent");
        FStarSpec f;
        f.knots_ = std::move(knots);
        f.cum_.assign(f.knots_.size(), 0.0);
        for (std::size_t i = 1; i < f.knots_.size(); ++i) {
            const auto& [s0, y0] = f.knots_[i - 1];
            const auto& [s1, y1] = f.knots_[i];
            f.cum_[i] = f.cum_[i - 1] + 0.5 * (s1 - s0) * (y0 + y1);
        }
        return f;
    }

    /// Rearrangement of a discrete source: every edge-midpoint sample carries
    /// weight |T|/3, matching the load quadrature.
    static FStarSpec from_source(const Mesh& mesh, const SourceSpec& src) {
        src.validate(mesh);
        if (src.kind == SourceSpec::Kind::constant) return constant(src.value);
        std::vector<std::pair<double, double>> samples; // (value, weight)
        samples.reserve(3 * mesh.triangle_count());
        for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
            for (int q = 0; q < 3; ++q) samples.emplace_back(src.at_midpoint(mesh, t, q), mesh.area(t) / 3.0);
        std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<std::pair<double, double>> knots;
        double s = 0.0;
        for (std::size_t i = 0; i < samples.size();) {
            const double y = samples[i].first;
            double w = 0.0;
            for (; i < samples.size() && samples[i].first == y; ++i) w += samples[i].second;
            knots.emplace_back(s, y);
            s += w;
            knots.emplace_back(s, y);
        }
        return table(std::move(knots));
    }

    [[nodiscard]] bool is_constant() const noexcept { return knots_.empty(); }
    [[nodiscard]] double constant_value() const noexcept { return constant_; }
    [[nodiscard]] const std::vector<std::pair<double, double>>& knots() const noexcept { return knots_; }

    /// Largest admissible s (infinite for a constant).
    [[nodiscard]] double extent() const {
        return is_constant() ? std::numeric_limits<double>::infinity() : knots_.back().first;
    }

    [[nodiscard]] double value(double s) const {
        check(s);
        if (is_constant()) return constant_;
        const std::size_t i = segment(s);
        if (i + 1 >= knots_.size()) return knots_.back().second;
        const auto& [s0, y0] = knots_[i];
        const auto& [s1, y1] = knots_[i + 1];
        return y0 + (y1 - y0) * (s - s0) / (s1 - s0);
    }

    /// int_0^s f*(sigma) d sigma, exact.
    [[nodiscard]] double cumulative(double s) const {
        check(s);
        if (is_constant()) return constant_ * s;
        const std::size_t i = segment(s);
        if (i + 1 >= knots_.size()) return cum_.back();
        return cum_[i] + 0.5 * (s - knots_[i].first) * (knots_[i].second + value(s));
    }

private:
    void check(double s) const {
        if (!(s >= 0.0) || s > extent() * (1.0 + 1e-12))
            throw ParameterError("f* argument " + std::to_string(s) + " outside [0, " + std::to_string(extent()) +
                                 "]");
    }

    // last knot index i with knots_[i].first <= s and a positive-length segment after it
    [[nodiscard]] std::size_t segment(double s) const {
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), s,
                                         [](double x, const auto& k) { return x < k.first; });
        return static_cast<std::size_t>(it - knots_.begin()) - 1;
    }

    double constant_ = 0.0;
    std::vector<std::pair<double, double>> knots_;
    std::vector<double> cum_;
};

inline double cumulative_f_star(const FStarSpec& spec, double s) { return spec.cumulative(s); }

/// Solution of the symmetrised problem on the annulus R1 < |x| < R0 with the
/// hole held at the constant c_bar = v(R1).
struct RadialProfile {
    int n = 2;
    double p = 2.0;
    double beta = 1.0;
    double R0 = 1.0;
    double R1 = 0.0;
    std::vector<double> r;     ///< ascending, r.front() = R1, r.back() = R0
    std::vector<double> v;     ///< v(r)
    std::vector<double> slope; ///< v'(r) <= 0
    double c_bar = 0.0;
    double v_boundary = 0.0;
    double v_m = 0.0;
    FStarSpec fstar = FStarSpec::constant(0.0);

    [[nodiscard]] double outer_volume() const { return unit_ball_volume(n) * std::pow(R0, n); }
    [[nodiscard]] double hole_volume() const { return unit_ball_volume(n) * std::pow(R1, n); }
    [[nodiscard]] double outer_perimeter() const { return n * unit_ball_volume(n) * std::pow(R0, n - 1); }

    /// Constant extension: c_bar inside the hole; cubic Hermite between samples.
    [[nodiscard]] double value_at(double x) const {
        if (x <= R1) return c_bar;
        if (x >= R0) return v_boundary;
        const std::size_t i = interval(x);
        const double h = r[i + 1] - r[i];
        const double s = (x - r[i]) / h;
        const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        const double h10 = s * (1.0 - s) * (1.0 - s);
        const double h01 = s * s * (3.0 - 2.0 * s);
        const double h11 = s * s * (s - 1.0);
        return h00 * v[i] + h10 * h * slope[i] + h01 * v[i + 1] + h11 * h * slope[i + 1];
    }

    /// Radius where v drops to t, for t in [v_boundary, c_bar].
    [[nodiscard]] double radius_at(double t) const {
        if (t >= c_bar) return R1;
        if (t <= v_boundary) return R0;
        // v is ascending-in-index reversed: find i with v[i] >= t >= v[i+1]
        const auto it = std::lower_bound(v.begin(), v.end(), t, [](double a, double b) { return a > b; });
        std::size_t i = static_cast<std::size_t>(it - v.begin());
        i = std::clamp<std::size_t>(i, 1, v.size() - 1) - 1;
        double lo = r[i], hi = r[i + 1];
        for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (value_at(mid) > t)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }

private:
    [[nodiscard]] std::size_t interval(double x) const {
        const auto it = std::upper_bound(r.begin(), r.end(), x);
        const auto i = static_cast<std::size_t>(it - r.begin());
        return std::clamp<std::size_t>(i, 1, r.size() - 1) - 1;
    }
};

namespace detail {

inline void check_radial_args(int n, double p, double beta, double R0, double R1) {
    if (n < 2) throw ParameterError("dimension must be at least 2");
    if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("p must exceed 1");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be positive");
    if (!(R1 >= 0.0) || !(R0 > R1) || !std::isfinite(R0))
        throw ParameterError("radii must satisfy 0 <= R1 < R0");
}

// Nodes on [R1, R0] graded towards R1 as x^{3/2}.
inline std::vector<double> graded_radii(double R0, double R1, std::size_t count) {
    std::vector<double> r(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(count - 1);
        r[i] = R1 + (R0 - R1) * std::pow(x, 1.5);
    }
    r.front() = R1;
    r.back() = R0;
    return r;
}

} // namespace detail

/// Radial integration of the symmetrised problem: |v'(r)|^{p-1} n omega_n r^{n-1}
/// equals the f*-mass of the ball of radius r, and the Robin condition fixes v(R0).
inline RadialProfile solve_radial(int n, double p, double beta, double R0, double R1, const FStarSpec& fstar,
                                  std::size_t grid = 4096) {
    detail::check_radial_args(n, p, beta, R0, R1);
    if (grid < 3) throw ParameterError("radial grid needs at least 3 points");
    const double omega = unit_ball_volume(n);
    if (omega * std::pow(R0, n) > fstar.extent() * (1.0 + 1e-9))
        throw ParameterError("f* extent is smaller than the outer volume");

    const double mass_cap = std::min(omega * std::pow(R0, n), fstar.extent());
    auto mass = [&](double r) { return fstar.cumulative(std::min(omega * std::pow(r, n), mass_cap)); };
    auto speed = [&](double r) {
        if (r <= 0.0) return 0.0;
        return std::pow(mass(r) / (n * omega * std::pow(r, n - 1)), 1.0 / (p - 1.0));
    };

    RadialProfile prof;
    prof.n = n;
    prof.p = p;
    prof.beta = beta;
    prof.R0 = R0;
    prof.R1 = R1;
    prof.fstar = fstar;
    prof.r = detail::graded_radii(R0, R1, grid);
    prof.v.assign(grid, 0.0);
    prof.slope.assign(grid, 0.0);

    const double vR0 = std::pow(mass(R0) / (n * omega * std::pow(R0, n - 1) * beta), 1.0 / (p - 1.0));
    const double scale = vR0 + speed(R0) * (R0 - R1);
    prof.v.back() = vR0;
    for (std::size_t i = 0; i < grid; ++i) prof.slope[i] = -speed(prof.r[i]);
    for (std::size_t i = grid - 1; i-- > 0;) {
        const double a = prof.r[i], b = prof.r[i + 1];
        bool exhausted = false;
        const double piece = scale > 0.0 ? quad::adaptive_simpson(speed, a, b, 1e-10 * scale * (b - a) / (R0 - R1),
                                                                   20, &exhausted)
                                         : 0.0;
        if (exhausted) throw ConvergenceError("radial quadrature missed its tolerance; refine the grid", piece);
        prof.v[i] = prof.v[i + 1] + piece;
    }
    prof.v_boundary = vR0;
    prof.v_m = vR0;
    prof.c_bar = prof.v.front();
    return prof;
}

/// phi(t) = |{v~ > t}| of the constant extension, as piecewise quadratics on
/// the sample values: node-exact, with the interval midpoint fixed by inversion.
inline DistributionFunction radial_distribution(const RadialProfile& prof) {
    const double omega = unit_ball_volume(prof.n);
    auto ball = [&](double x) { return omega * std::pow(x, prof.n); };
    const std::size_t N = prof.r.size();
    for (std::size_t i = 0; i + 1 < N; ++i)
        if (prof.v[i + 1] > prof.v[i]) throw ContractError("radial samples are not monotone");

    std::vector<double> bp{0.0};
    std::vector<DistributionFunction::Piece> pieces;
    const double total = ball(prof.R0);
    if (prof.c_bar <= 0.0) return DistributionFunction(std::move(bp), std::move(pieces), total);
    if (prof.v_boundary > 0.0) {
        bp.push_back(prof.v_boundary);
        pieces.push_back({0.0, 0.0, total});
    }
    // walk inward: t increases as r decreases
    for (std::size_t i = N - 1; i-- > 0;) {
        const double ta = prof.v[i + 1], tb = prof.v[i];
        if (!(tb > ta)) continue;
        const double ya = ball(prof.r[i + 1]);
        const double yb = ball(prof.r[i]);
        const double h = tb - ta;
        const double ym = ball(prof.radius_at(ta + 0.5 * h));
        // y(tau) = c + b tau + a tau^2 through tau = 0, h/2, h
        const double a = 2.0 * (ya - 2.0 * ym + yb) / (h * h);
        const double b = (yb - ya) / h - a * h;
        pieces.push_back({a, b, ya});
        bp.push_back(tb);
    }
    if (bp.size() == 1) {
        // degenerate: a flat profile is a single plateau
        bp.push_back(prof.c_bar);
        pieces.push_back({0.0, 0.0, total});
    }
    return DistributionFunction(std::move(bp), std::move(pieces), total);
}

struct RadialEigenSolution {
    double lambda = 0.0;
    std::vector<double> r;   ///< uniform nodes on [R1, R0]
    std::vector<double> phi; ///< non-negative, unit L^p norm including the plateau
    int iterations = 0;
    std::vector<double> history;
};

namespace detail {

// 1D P1 model of the symmetrised Robin problem with the plateau volume
// omega_n R1^n attached to the first node.
class RadialEnergy {
public:
    RadialEnergy(int n, double p, double beta, std::vector<double> nodes)
        : p_(p), beta_(beta), r_(std::move(nodes)) {
        const double omega = unit_ball_volume(n);
        const std::size_t E = r_.size() - 1;
        vol_.resize(E);
        qw_.resize(2 * E);
        for (std::size_t e = 0; e < E; ++e) {
            const double a = r_[e], b = r_[e + 1];
            vol_[e] = omega * (std::pow(b, n) - std::pow(a, n));
            for (int q = 0; q < 2; ++q) {
                const double rq = a + (b - a) * xi(q);
                qw_[2 * e + q] = 0.5 * (b - a) * n * omega * std::pow(rq, n - 1);
            }
        }
        plateau_ = omega * std::pow(r_.front(), n);
        surface_ = n * omega * std::pow(r_.back(), n - 1);
        source_.assign(2 * E + 1, 0.0);
    }

    static double xi(int q) { return q == 0 ? 0.5 - 0.5 / std::sqrt(3.0) : 0.5 + 0.5 / std::sqrt(3.0); }

    [[nodiscard]] std::size_t size() const { return r_.size(); }

    // source values at the quadrature points, last entry for the plateau
    void set_source(std::vector<double> s) { source_ = std::move(s); }

    template <class V>
    [[nodiscard]] double at_point(const V& x, std::size_t e, int q) const {
        return x[e] * (1.0 - xi(q)) + x[e + 1] * xi(q);
    }

    [[nodiscard]] double mass(const Eigen::VectorXd& x) const {
        double m = plateau_ * std::pow(std::abs(x[0]), p_);
        for (std::size_t e = 0; e + 1 < r_.size(); ++e)
            for (int q = 0; q < 2; ++q) m += qw_[2 * e + q] * std::pow(std::abs(at_point(x, e, q)), p_);
        return m;
    }

    [[nodiscard]] double robin_energy(const Eigen::VectorXd& x) const {
        double s = beta_ * surface_ * std::pow(std::abs(x[x.size() - 1]), p_);
        for (std::size_t e = 0; e + 1 < r_.size(); ++e)
            s += vol_[e] * std::pow(std::abs((x[e + 1] - x[e]) / (r_[e + 1] - r_[e])), p_);
        return s;
    }

    [[nodiscard]] double value(const Eigen::VectorXd& x, double eps) const {
        double f = beta_ / p_ * surface_ * std::pow(std::abs(x[x.size() - 1]), p_);
        f -= plateau_ * source_.back() * x[0];
        for (std::size_t e = 0; e + 1 < r_.size(); ++e) {
            const double g = (x[e + 1] - x[e]) / (r_[e + 1] - r_[e]);
            f += vol_[e] / p_ * std::pow(eps * eps + g * g, 0.5 * p_);
            for (int q = 0; q < 2; ++q) f -= qw_[2 * e + q] * source_[2 * e + q] * at_point(x, e, q);
        }
        return f;
    }

    [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& x, double eps) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
        const Eigen::Index last = x.size() - 1;
        g[last] += beta_ * surface_ * signed_pow(x[last], p_ - 1.0);
        g[0] -= plateau_ * source_.back();
        for (std::size_t e = 0; e + 1 < r_.size(); ++e) {
            const double h = r_[e + 1] - r_[e];
            const double d = (x[e + 1] - x[e]) / h;
            const double flux = vol_[e] * std::pow(eps * eps + d * d, 0.5 * p_ - 1.0) * d / h;
            g[e] -= flux;
            g[e + 1] += flux;
            for (int q = 0; q < 2; ++q) {
                const double w = qw_[2 * e + q] * source_[2 * e + q];
                g[e] -= w * (1.0 - xi(q));
                g[e + 1] -= w * xi(q);
            }
        }
        return g;
    }

    [[nodiscard]] Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x, double eps) const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(4 * r_.size());
        const Eigen::Index last = x.size() - 1;
        trip.emplace_back(last, last,
                          beta_ * surface_ * (p_ - 1.0) * std::pow(eps * eps + x[last] * x[last], 0.5 * p_ - 1.0));
        for (std::size_t e = 0; e + 1 < r_.size(); ++e) {
            const double h = r_[e + 1] - r_[e];
            const double d = (x[e + 1] - x[e]) / h;
            const double s = eps * eps + d * d;
            const double k = vol_[e] * std::pow(s, 0.5 * p_ - 2.0) * (eps * eps + (p_ - 1.0) * d * d) / (h * h);
            const auto i = static_cast<Eigen::Index>(e);
            trip.emplace_back(i, i, k);
            trip.emplace_back(i + 1, i + 1, k);
            trip.emplace_back(i, i + 1, -k);
            trip.emplace_back(i + 1, i, -k);
        }
        Eigen::SparseMatrix<double> H(x.size(), x.size());
        H.setFromTriplets(trip.begin(), trip.end());
        return H;
    }

    [[nodiscard]] double plateau() const { return plateau_; }

private:
    double p_, beta_;
    std::vector<double> r_;
    std::vector<double> vol_;
    std::vector<double> qw_;
    double plateau_ = 0.0;
    double surface_ = 0.0;
    std::vector<double> source_;
};

struct RadialStage {
    const RadialEnergy& energy;
    double eps;
    [[nodiscard]] double value(const Eigen::VectorXd& x) const { return energy.value(x, eps); }
    [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return energy.gradient(x, eps); }
    [[nodiscard]] Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const {
        return energy.hessian(x, eps);
    }
};

} // namespace detail

/// First Robin p-eigenvalue of the annulus with a plateau hole, by the same
/// Picard scheme as the FEM eigen solver on a uniform 1D P1 grid.
inline RadialEigenSolution solve_radial_eigen(int n, double p, double beta, double R0, double R1,
                                              std::size_t grid = 1024, const SolveParams& params = {}) {
    detail::check_radial_args(n, p, beta, R0, R1);
    if (grid < 2) throw ParameterError("radial eigen grid needs at least 2 elements");
    std::vector<double> nodes(grid + 1);
    for (std::size_t i = 0; i <= grid; ++i) nodes[i] = R1 + (R0 - R1) * static_cast<double>(i) / grid;
    nodes.back() = R0;
    detail::RadialEnergy energy(n, p, beta, nodes);

    NewtonOptions opt;
    opt.tol = params.newton_tol;
    opt.max_iters = params.max_newton_iters;
    opt.backtrack = params.line_search_factor;
    opt.max_backtracks = params.line_search_max_steps;

    auto normalise = [&](Eigen::VectorXd x) {
        x = x.cwiseMax(0.0);
        return Eigen::VectorXd(x * std::pow(energy.mass(x), -1.0 / p));
    };
    auto quotient = [&](const Eigen::VectorXd& x) { return energy.robin_energy(x) / energy.mass(x); };

    Eigen::VectorXd u = normalise(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(grid + 1)));
    double lambda = quotient(u);
    RadialEigenSolution out;
    out.r = nodes;
    out.history.push_back(lambda);

    for (int k = 1; k <= params.max_eigen_iters; ++k) {
        std::vector<double> src(2 * grid + 1);
        for (std::size_t e = 0; e < grid; ++e)
            for (int q = 0; q < 2; ++q)
                src[2 * e + q] = lambda * std::pow(std::abs(energy.at_point(u, e, q)), p - 1.0);
        src.back() = lambda * std::pow(std::abs(u[0]), p - 1.0);
        energy.set_source(std::move(src));

        Eigen::VectorXd x = u;
        const std::vector<double> fine{params.epsilon_min()};
        const auto& schedule = k == 1 ? params.epsilon_schedule : fine;
        for (std::size_t s = 0; s < schedule.size(); ++s) {
            try {
                newton_minimize(detail::RadialStage{energy, schedule[s]}, x, opt);
            } catch (const ConvergenceError& e) {
                if (s + 1 == schedule.size())
                    throw ConvergenceError("radial eigen state solve failed", e.last_residual());
            }
        }
        const Eigen::VectorXd next = normalise(x);
        const double lambda_next = quotient(next);
        out.history.push_back(lambda_next);
        if (lambda_next > lambda * (1.0 + 1e-6))
            throw DiagnosticError("radial Rayleigh quotient increased at Picard step " + std::to_string(k));
        const bool done = std::abs(lambda_next - lambda) <= params.newton_tol * lambda;
        u = next;
        lambda = lambda_next;
        if (done) {
            out.lambda = lambda;
            out.phi.assign(u.data(), u.data() + u.size());
            out.iterations = k;
            return out;
        }
    }
    throw ConvergenceError("radial eigen iteration did not converge",
                           std::abs(out.history.back() - out.history[out.history.size() - 2]) / lambda);
}

} // namespace talenti
