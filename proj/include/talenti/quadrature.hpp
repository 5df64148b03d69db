#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include <boost/math/quadrature/gauss.hpp>

namespace talenti::quad {

/// Gauss-Legendre rule with N points mapped to the unit interval [0, 1].
/// Weights sum to one.
template <unsigned N>
struct UnitGauss {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    UnitGauss() {
        using rule = boost::math::quadrature::gauss<double, N>;
        const auto& x = rule::abscissa();
        const auto& w = rule::weights();
        // boost stores the non-negative half of a symmetric rule
        std::size_t k = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0) {
                nodes[k] = 0.5;
                weights[k] = 0.5 * w[i];
                ++k;
                continue;
            }
            nodes[k] = 0.5 * (1.0 - x[i]);
            weights[k] = 0.5 * w[i];
            ++k;
            nodes[k] = 0.5 * (1.0 + x[i]);
            weights[k] = 0.5 * w[i];
            ++k;
        }
    }
};

template <unsigned N>
inline const UnitGauss<N>& unit_gauss() {
    static const UnitGauss<N> rule;
    return rule;
}

/// N-point Gauss-Legendre on [a, b].
template <unsigned N, class F>
inline double gauss(F&& f, double a, double b) {
    const auto& rule = unit_gauss<N>();
    const double h = b - a;
    double sum = 0.0;
    for (unsigned i = 0; i < N; ++i) sum += rule.weights[i] * f(a + h * rule.nodes[i]);
    return sum * h;
}

namespace detail {

template <class F>
double simpson_step(F& f, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth, bool& exhausted) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0) {
        exhausted = true;
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, exhausted) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, exhausted);
}

} // namespace detail

/// Adaptive Simpson with Richardson correction; `tol` is absolute. Sets
/// `*exhausted` when some subinterval hit `max_depth` before meeting `tol`.
template <class F>
inline double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 40,
                               bool* exhausted = nullptr) {
    bool hit = false;
    if (exhausted) *exhausted = false;
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double r = detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth, hit);
    if (exhausted) *exhausted = hit;
    return r;
}

} // namespace talenti::quad
