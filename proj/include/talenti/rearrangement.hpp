#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "talenti/error.hpp"
#include "talenti/fem.hpp"
#include "talenti/geometry.hpp"
#include "talenti/quadrature.hpp"

namespace talenti {

/// Right-continuous, non-increasing, piecewise-quadratic distribution
/// function mu(t) = |{u > t}| of a non-negative function.
///
/// Breakpoints 0 = t_0 < t_1 < ... < t_M. On [t_j, t_{j+1}) the piece is
/// stored in local form mu(t) = c_j + b_j (t - t_j) + a_j (t - t_j)^2, which
/// stays well conditioned when neighbouring breakpoints nearly coincide.
/// mu vanishes on [t_M, inf).
class DistributionFunction {
public:
    struct Piece {
        double a = 0.0;
        double b = 0.0;
        double c = 0.0;
    };

    DistributionFunction(std::vector<double> breakpoints, std::vector<Piece> pieces, double total_mass)
        : t_(std::move(breakpoints)), pieces_(std::move(pieces)), total_mass_(total_mass) {
        if (t_.empty() || t_.front() != 0.0) throw ContractError("breakpoints must start at 0");
        if (pieces_.size() + 1 != t_.size()) throw ContractError("need one piece per breakpoint interval");
        for (std::size_t j = 1; j < t_.size(); ++j)
            if (!(t_[j] > t_[j - 1])) throw ContractError("breakpoints must be strictly increasing");
        build_sequence();
    }

    [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return t_; }
    [[nodiscard]] const std::vector<Piece>& pieces() const noexcept { return pieces_; }
    [[nodiscard]] double total_mass() const noexcept { return total_mass_; }
    [[nodiscard]] double max_value() const noexcept { return t_.back(); }
    [[nodiscard]] std::size_t interval_count() const noexcept { return pieces_.size(); }

    /// Value of piece j at t (no range check).
    [[nodiscard]] double piece_value(std::size_t j, double t) const {
        const auto& pc = pieces_[j];
        const double tau = t - t_[j];
        return pc.c + tau * (pc.b + tau * pc.a);
    }

    /// Limit of mu as t increases to t_{j+1}.
    [[nodiscard]] double left_limit(std::size_t j) const { return piece_value(j, t_[j + 1]); }

    /// Index of the interval containing t, or interval_count() when t >= t_M.
    [[nodiscard]] std::size_t locate(double t) const {
        const auto it = std::upper_bound(t_.begin(), t_.end(), t);
        return static_cast<std::size_t>(it - t_.begin()) - 1;
    }

    [[nodiscard]] double operator()(double t) const {
        if (t < 0.0) return total_mass_;
        const std::size_t j = locate(t);
        if (j >= pieces_.size()) return 0.0;
        return piece_value(j, t);
    }

    /// Analytic mu'(t); meaningful away from breakpoints.
    [[nodiscard]] double derivative(double t) const {
        if (t < 0.0) return 0.0;
        const std::size_t j = locate(t);
        if (j >= pieces_.size()) return 0.0;
        return pieces_[j].b + 2.0 * pieces_[j].a * (t - t_[j]);
    }

    /// int_0^inf mu(t) dt, exact.
    [[nodiscard]] double integral() const {
        double sum = 0.0;
        for (std::size_t j = 0; j < pieces_.size(); ++j) {
            const double h = t_[j + 1] - t_[j];
            const auto& pc = pieces_[j];
            sum += h * (pc.c + h * (pc.b / 2.0 + h * pc.a / 3.0));
        }
        return sum;
    }

    /// int_0^{|Omega_0|} u*(s)^p ds, computed piecewise as int t^p (-mu'(t)) dt
    /// plus t^p times every downward jump.
    [[nodiscard]] double power_integral(double p) const {
        double sum = 0.0;
        for (std::size_t j = 0; j < pieces_.size(); ++j) {
            const auto& pc = pieces_[j];
            const double t0 = t_[j];
            sum += quad::gauss<16>(
                [&](double t) { return std::pow(t, p) * -(pc.b + 2.0 * pc.a * (t - t0)); }, t0, t_[j + 1]);
            const double next = j + 1 < pieces_.size() ? pieces_[j + 1].c : 0.0;
            sum += std::pow(t_[j + 1], p) * (left_limit(j) - next);
        }
        return sum;
    }

    /// Decreasing rearrangement u*(s) = inf{t >= 0 : mu(t) < s}, 0 < s <= |Omega_0|.
    [[nodiscard]] double quantile(double s) const {
        if (!(s > 0.0) || s > total_mass_ * (1.0 + 1e-14))
            throw ParameterError("quantile argument " + std::to_string(s) + " outside (0, " +
                                 std::to_string(total_mass_) + "]");
        // seq_ = mu(t_0), mu(t_1^-), mu(t_1), ..., mu(t_M^-), mu(t_M) = 0 is non-increasing
        const auto it = std::lower_bound(seq_.begin(), seq_.end(), s, [](double v, double x) { return v >= x; });
        const auto k = static_cast<std::size_t>(it - seq_.begin());
        if (k >= seq_.size()) return t_.back();
        if (k % 2 == 0) return t_[k / 2];
        return invert_piece(k / 2, s);
    }

    /// Quasi-norm of L^{P,q}: P^{1/q} (int_0^inf t^q mu(t)^{q/P} dt/t)^{1/q}, 0 < q < inf.
    [[nodiscard]] double lorentz_norm(double P, double q) const {
        if (!(P > 0.0) || !(q > 0.0) || !std::isfinite(q))
            throw ParameterError("Lorentz exponents must satisfy P > 0 and 0 < q < inf");
        double sum = 0.0;
        for (std::size_t j = 0; j < pieces_.size(); ++j) {
            sum += quad::gauss<16>(
                [&](double t) {
                    const double mu = std::max(piece_value(j, t), 0.0);
                    return std::pow(t, q - 1.0) * std::pow(mu, q / P);
                },
                t_[j], t_[j + 1]);
        }
        return std::pow(P, 1.0 / q) * std::pow(sum, 1.0 / q);
    }

    /// s-coordinates where u* changes formula (values of mu at and just before breakpoints).
    [[nodiscard]] const std::vector<double>& mass_levels() const noexcept { return seq_; }

private:
    void build_sequence() {
        seq_.clear();
        for (std::size_t j = 0; j < pieces_.size(); ++j) {
            seq_.push_back(pieces_[j].c);
            seq_.push_back(left_limit(j));
        }
        seq_.push_back(0.0);
        // enforce monotonicity against rounding in the piece evaluations
        for (std::size_t i = 1; i < seq_.size(); ++i) seq_[i] = std::min(seq_[i], seq_[i - 1]);
    }

    // t in [t_j, t_{j+1}] with piece_j(t) = s, where mu(t_j) >= s > mu(t_{j+1}^-).
    [[nodiscard]] double invert_piece(std::size_t j, double s) const {
        const auto& pc = pieces_[j];
        const double h = t_[j + 1] - t_[j];
        const double c = pc.c - s;
        double tau = -1.0;
        if (pc.a == 0.0) {
            if (pc.b != 0.0) tau = -c / pc.b;
        } else {
            const double disc = pc.b * pc.b - 4.0 * pc.a * c;
            if (disc >= 0.0) {
                const double q = -0.5 * (pc.b + std::copysign(std::sqrt(disc), pc.b));
                const double r1 = q != 0.0 ? q / pc.a : -1.0;
                const double r2 = q != 0.0 ? c / q : -1.0;
                const double tol = 1e-12 * h;
                for (double r : {r1, r2})
                    if (r >= -tol && r <= h + tol && (tau < 0.0 || r < tau)) tau = r;
            }
        }
        if (!(tau >= 0.0 && tau <= h * (1.0 + 1e-12))) {
            // bisection fallback on the monotone piece
            double lo = 0.0, hi = h;
            for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (piece_value(j, t_[j] + mid) >= s)
                    lo = mid;
                else
                    hi = mid;
            }
            tau = 0.5 * (lo + hi);
        }
        return t_[j] + std::clamp(tau, 0.0, h);
    }

    std::vector<double> t_;
    std::vector<Piece> pieces_;
    double total_mass_;
    std::vector<double> seq_;
};

/// Exact distribution function of a non-negative P1 function given by nodal values.
inline DistributionFunction distribution_function_p1(const Mesh& mesh, std::span<const double> nodal) {
    if (nodal.size() != mesh.vertex_count()) throw ContractError("one nodal value per vertex required");
    double scale = 0.0;
    for (double v : nodal) scale = std::max(scale, std::abs(v));
    std::vector<double> vals(nodal.begin(), nodal.end());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i] < -1e-12 * std::max(scale, 1.0))
            throw ContractError("field is negative at vertex " + std::to_string(i) + " (" +
                                std::to_string(vals[i]) + ")");
        vals[i] = std::max(vals[i], 0.0);
    }

    std::vector<double> bp(vals);
    bp.push_back(0.0);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    const std::size_t M = bp.size() - 1;
    auto index_of = [&](double v) {
        return static_cast<std::size_t>(std::lower_bound(bp.begin(), bp.end(), v) - bp.begin());
    };

    std::vector<DistributionFunction::Piece> pieces(M);
    std::vector<double> plateau(M + 1, 0.0); // difference array for constant contributions
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles()[t].v;
        std::array<double, 3> v{vals[tri[0]], vals[tri[1]], vals[tri[2]]};
        std::sort(v.begin(), v.end());
        const double A = mesh.area(t);
        total += A;
        const std::size_t j1 = index_of(v[0]), j2 = index_of(v[1]), j3 = index_of(v[2]);
        plateau[0] += A;
        plateau[j1] -= A;
        if (j2 > j1) {
            const double D = (v[1] - v[0]) * (v[2] - v[0]);
            for (std::size_t j = j1; j < j2; ++j) {
                const double delta = bp[j] - v[0];
                auto& pc = pieces[j];
                pc.c += A - A * delta * delta / D;
                pc.b += -2.0 * A * delta / D;
                pc.a += -A / D;
            }
        }
        if (j3 > j2) {
            const double D = (v[2] - v[0]) * (v[2] - v[1]);
            for (std::size_t j = j2; j < j3; ++j) {
                const double e = v[2] - bp[j];
                auto& pc = pieces[j];
                pc.c += A * e * e / D;
                pc.b += -2.0 * A * e / D;
                pc.a += A / D;
            }
        }
    }
    double running = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
        running += plateau[j];
        pieces[j].c += running;
    }
    return DistributionFunction(std::move(bp), std::move(pieces), total);
}

inline DistributionFunction distribution_function_p1(const Field& field) {
    const auto nodal = field.nodal_values();
    return distribution_function_p1(field.mesh(), nodal);
}

/// int over the part of the exterior boundary where u > t of 1/u, in closed
/// form per edge for the linear trace.
inline double exterior_boundary_integral(const Mesh& mesh, std::span<const double> nodal, double t) {
    double sum = 0.0;
    for (std::size_t e : mesh.edges_with_tag(0)) {
        const auto& edge = mesh.boundary_edges()[e];
        const double a = nodal[edge.v[0]];
        const double b = nodal[edge.v[1]];
        const double lo = std::min(a, b), hi = std::max(a, b);
        if (hi <= t) continue;
        if (lo <= 0.0)
            throw ContractError("field is not positive on boundary edge " + std::to_string(e));
        const double len = mesh.edge_length(e);
        if (hi - lo <= 1e-12 * hi) {
            sum += len / (0.5 * (a + b));
            continue;
        }
        const double from = std::max(lo, t);
        sum += len * std::log1p((hi - from) / from) / (hi - lo);
    }
    return sum;
}

inline double exterior_boundary_integral(const Field& field, double t) {
    const auto nodal = field.nodal_values();
    return exterior_boundary_integral(field.mesh(), nodal, t);
}

/// int_a^b f(s) ds by 16-point Gauss after s = a + (b - a)(3x^2 - 2x^3). The map
/// absorbs square-root endpoint behaviour of u*, which appears wherever mu has
/// a vanishing slope (always at the maximum).
template <class F>
inline double smoothstep_gauss(F&& f, double a, double b) {
    return quad::gauss<16>(
        [&](double x) {
            const double w = x * x * (3.0 - 2.0 * x);
            return f(a + (b - a) * w) * 6.0 * x * (1.0 - x) * (b - a);
        },
        0.0, 1.0);
}

namespace detail {

// Adaptive bisection over smoothstep_gauss, accepting a split when the two
// halves agree with the whole to `tol`.
template <class F>
double adaptive_smoothstep(F& f, double a, double b, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = smoothstep_gauss(f, a, m), right = smoothstep_gauss(f, m, b);
    if (depth <= 0 || std::abs(left + right - whole) <= tol) return left + right;
    return adaptive_smoothstep(f, a, m, left, 0.5 * tol, depth - 1) +
           adaptive_smoothstep(f, m, b, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// int_0^M h*(s) g*(s) ds on the merged pieces of both rearrangements, each
/// piece integrated adaptively to a relative 1e-13 of the running scale.
inline double rearranged_product_integral(const DistributionFunction& h, const DistributionFunction& g) {
    const double mass = std::min(h.total_mass(), g.total_mass());
    std::vector<double> s{0.0, mass};
    for (const auto* df : {&h, &g})
        for (double x : df->mass_levels())
            if (x > 0.0 && x < mass) s.push_back(x);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    auto f = [&](double x) { return h.quantile(x) * g.quantile(x); };
    const double scale = std::max(h.max_value() * g.max_value() * mass, 1e-300);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double tol = 1e-13 * scale * (s[i + 1] - s[i]) / mass;
        sum += detail::adaptive_smoothstep(f, s[i], s[i + 1], smoothstep_gauss(f, s[i], s[i + 1]), tol, 30);
    }
    return sum;
}

} // namespace talenti
