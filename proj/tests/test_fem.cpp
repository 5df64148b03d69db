#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "talenti/fem.hpp"
#include "talenti/plaplace.hpp"
#include "talenti/radial.hpp"

using namespace talenti;
using std::numbers::pi;

namespace {

std::shared_ptr<const Mesh> shared(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

std::shared_ptr<const Mesh> disk(int nr = 16, int na = 64) { return shared(generate_disk_mesh(1.0, nr, na)); }

std::shared_ptr<const Mesh> annulus(double d = 0.0, int nr = 16, int na = 64) {
    return shared(generate_eccentric_annulus_mesh(1.0, 0.5, d, nr, na));
}

SolveParams params(double p, double beta = 1.0) {
    SolveParams s;
    s.p = p;
    s.beta = beta;
    return s;
}

double radius(const Point2& v) { return std::hypot(v.x, v.y); }

// Vertices on the exterior boundary loop.
std::set<int> exterior_vertices(const Mesh& m) {
    std::set<int> out;
    for (const auto& e : m.boundary_edges())
        if (e.tag == 0) out.insert({e.v[0], e.v[1]});
    return out;
}

} // namespace

TEST(DofMap, DiskIsIdentityLike) {
    const auto m = generate_disk_mesh(1.0, 4, 16);
    const auto d = build_dof_map(m);
    EXPECT_EQ(d.free_count, static_cast<int>(m.vertex_count()));
    EXPECT_TRUE(d.hole_dofs.empty());
    std::set<int> seen(d.node_to_dof.begin(), d.node_to_dof.end());
    EXPECT_EQ(seen.size(), m.vertex_count());
}

TEST(DofMap, AnnulusCollapsesClosedHole) {
    const auto m = generate_eccentric_annulus_mesh(1.0, 0.5, 0.2, 8, 32);
    std::set<int> hole_vertices;
    for (const auto& t : m.triangles())
        if (t.region == 1) hole_vertices.insert(t.v.begin(), t.v.end());
    const auto d = build_dof_map(m);
    EXPECT_EQ(d.free_count, static_cast<int>(m.vertex_count() - hole_vertices.size() + 1));
    ASSERT_EQ(d.hole_dofs.size(), 1u);
    for (int v : hole_vertices) EXPECT_EQ(d.node_to_dof[v], d.hole_dofs[0]);
    std::vector<int> sorted(d.node_to_dof);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    EXPECT_EQ(sorted.front(), 0);
    EXPECT_EQ(sorted.back(), d.free_count - 1);
    EXPECT_EQ(static_cast<int>(sorted.size()), d.free_count);
}

TEST(DofMap, TwoHoleIndicator) {
    const auto m = shared(test_support::two_hole_mesh(4));
    auto d = std::make_shared<const DofMap>(build_dof_map(*m));
    ASSERT_EQ(d->hole_dofs.size(), 2u);
    std::vector<double> v(d->free_count, 0.0);
    v[d->hole_dofs[0]] = 1.0;
    const Field f(m, d, v);
    EXPECT_EQ(f.hole_constant(1), 1.0);
    EXPECT_EQ(f.hole_constant(2), 0.0);
    for (const auto& t : m->triangles())
        for (int x : t.v) {
            if (t.region == 1) EXPECT_EQ(f.nodal(x), 1.0);
            if (t.region == 2) EXPECT_EQ(f.nodal(x), 0.0);
        }
    EXPECT_THROW((void)f.hole_constant(3), ParameterError);
}

TEST(Energy, ZeroFieldHasZeroEnergy) {
    const auto f = Field::zero(annulus(0.3, 4, 16));
    for (double p : {1.5, 2.0, 4.0}) EXPECT_EQ(energy_value(f, params(p, 2.0), SourceSpec::constant(3.0), 0.0), 0.0);
}

TEST(Energy, ConstantFieldBoundaryTermOnly) {
    const auto m = shared(test_support::unit_square());
    const auto z = Field::zero(m);
    const Field one = z.with_values(std::vector<double>(z.dofs().free_count, 1.0));
    for (double p : {1.5, 2.0, 3.0})
        for (double beta : {0.5, 2.0})
            EXPECT_NEAR(energy_value(one, params(p, beta), SourceSpec::constant(0.0), 0.0), beta / p * 4.0, 1e-14);
}

TEST(Energy, ConstantFieldOnDisk) {
    const auto m = disk(4, 16);
    const auto z = Field::zero(m);
    const Field one = z.with_values(std::vector<double>(z.dofs().free_count, 1.0));
    const auto rm = region_metrics(*m);
    EXPECT_NEAR(energy_value(one, params(2.0), SourceSpec::constant(1.0), 0.0),
                0.5 * rm.perimeter_exterior - rm.area_total, 1e-13);
}

TEST(Energy, RejectsBadInput) {
    const auto f = Field::zero(disk(2, 8));
    EXPECT_THROW(energy_value(f, params(2.0), SourceSpec::constant(1.0), -1.0), ParameterError);
    EXPECT_THROW(energy_value(f, params(2.0), SourceSpec::per_triangle({1.0}), 0.0), ParameterError);
    EXPECT_THROW(solve_state(disk(2, 8), params(2.0), SourceSpec::constant(-1.0)), ParameterError);
    EXPECT_THROW(solve_state(disk(2, 8), params(0.5), SourceSpec::constant(1.0)), ParameterError);
    EXPECT_THROW(solve_state(disk(2, 8), params(2.0), SourceSpec::constant(1.0), Field::zero(disk(3, 12))),
                 ContractError);
}

TEST(Energy, GradientMatchesCentralDifferences) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double p : {1.5, 2.0, 3.0}) {
        const auto m = annulus(0.3, 4, 16);
        auto d = std::make_shared<const DofMap>(build_dof_map(*m));
        const PLaplaceEnergy e(m, d, p, 1.3, SourceSpec::constant(1.0));
        Eigen::VectorXd x(d->free_count);
        for (auto& v : x) v = 0.5 + 0.3 * g(rng);
        const double eps = 1e-3;
        const Eigen::VectorXd grad = e.gradient(x, eps);
        for (int k = 0; k < 10; ++k) {
            Eigen::VectorXd dir(d->free_count);
            for (auto& v : dir) v = g(rng);
            dir /= dir.norm();
            const double h = 1e-6;
            const double fd = (e.value(x + h * dir, eps) - e.value(x - h * dir, eps)) / (2.0 * h);
            const double an = grad.dot(dir);
            EXPECT_NEAR(fd, an, 1e-5 * std::max(1.0, std::abs(an))) << "p=" << p << " k=" << k;
        }
    }
}

TEST(Energy, HessianMatchesGradientDifferences) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    const auto m = annulus(0.3, 4, 16);
    auto d = std::make_shared<const DofMap>(build_dof_map(*m));
    const PLaplaceEnergy e(m, d, 3.0, 1.0, SourceSpec::constant(1.0));
    Eigen::VectorXd x(d->free_count), dir(d->free_count);
    for (auto& v : x) v = 0.5 + 0.3 * g(rng);
    for (auto& v : dir) v = g(rng);
    const double h = 1e-6;
    const Eigen::VectorXd fd = (e.gradient(x + h * dir, 1e-2) - e.gradient(x - h * dir, 1e-2)) / (2.0 * h);
    const Eigen::VectorXd an = e.hessian(x, 1e-2) * dir;
    EXPECT_LT((fd - an).norm(), 1e-5 * an.norm());
}

TEST(State, ZeroSourceGivesZero) {
    const auto s = solve_state(annulus(0.2, 4, 16), params(3.0), SourceSpec::constant(0.0));
    for (double v : s.field.dof_values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(State, DiskMatchesRadialSolution) {
    const auto m = disk();
    const auto s = solve_state(m, params(2.0), SourceSpec::constant(1.0));
    double worst = 0.0;
    for (std::size_t v = 0; v < m->vertex_count(); ++v) {
        const double r = radius(m->vertices()[v]);
        const double exact = 0.5 + (1.0 - r * r) / 4.0;
        worst = std::max(worst, std::abs(s.field.nodal(v) - exact) / exact);
    }
    EXPECT_LT(worst, 0.01);
}

TEST(State, AnnulusHoleConstant) {
    const auto s = solve_state(annulus(), params(2.0), SourceSpec::constant(1.0));
    // u(r) = 1/(2 beta) + (1 - r^2)/4 on the bulk, so c1 = u(1/2)
    EXPECT_NEAR(s.field.hole_constant(1), 0.6875, 0.01 * 0.6875);
}

TEST(State, AnnulusMatchesRadialOracle) {
    const auto m = annulus();
    const auto s = solve_state(m, params(3.0), SourceSpec::constant(1.0));
    const auto prof = solve_radial(2, 3.0, 1.0, 1.0, 0.5, FStarSpec::constant(1.0));
    double worst = 0.0;
    for (std::size_t v = 0; v < m->vertex_count(); ++v) {
        const double r = std::max(radius(m->vertices()[v]), 0.5);
        worst = std::max(worst, std::abs(s.field.nodal(v) - prof.value_at(r)) / prof.c_bar);
    }
    EXPECT_LT(worst, 0.01);
}

TEST(State, ConvergedResidual) {
    for (double p : {1.5, 2.0, 3.0}) {
        const auto s = solve_state(annulus(0.3, 8, 32), params(p), SourceSpec::constant(1.0));
        const auto& last = s.diagnostics.stages.back();
        EXPECT_TRUE(last.converged);
        EXPECT_LE(last.residual, 1e-10 * (1.0 + std::abs(last.energy))) << "p=" << p;
        EXPECT_EQ(last.epsilon, 1e-4);
    }
}

TEST(State, EnergyDecreases) {
    const auto s = solve_state(annulus(0.3, 8, 32), params(3.0), SourceSpec::constant(1.0));
    for (const auto& st : s.diagnostics.stages)
        for (std::size_t i = 1; i < st.energy_history.size(); ++i)
            EXPECT_LE(st.energy_history[i], st.energy_history[i - 1] + 1e-13 * (1.0 + std::abs(st.energy_history[i - 1])));
    // the continuation result beats the zero initial guess at eps_min
    EXPECT_LT(energy_value(s.field, params(3.0), SourceSpec::constant(1.0), 1e-4),
              energy_value(Field::zero(s.field.mesh_ptr()), params(3.0), SourceSpec::constant(1.0), 1e-4));
}

TEST(State, NonConvergenceIsReported) {
    auto sp = params(4.0);
    sp.max_newton_iters = 1;
    try {
        solve_state(annulus(0.3, 4, 16), sp, SourceSpec::constant(1.0));
        FAIL() << "expected a convergence error";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.last_residual(), 0.0);
    }
}

TEST(State, PositivityAndBoundaryMinimum) {
    for (double p : {1.5, 2.0, 3.0}) {
        const auto m = annulus(0.3, 8, 32);
        const auto s = solve_state(m, params(p), SourceSpec::constant(1.0));
        const auto ext = exterior_vertices(*m);
        double min_all = 1e300, min_ext = 1e300;
        for (std::size_t v = 0; v < m->vertex_count(); ++v) {
            min_all = std::min(min_all, s.field.nodal(v));
            if (ext.contains(static_cast<int>(v))) min_ext = std::min(min_ext, s.field.nodal(v));
        }
        EXPECT_GT(min_all, 0.0);
        EXPECT_EQ(min_all, min_ext) << "p=" << p;
        EXPECT_GT(s.field.hole_constant(1), min_ext);
    }
}

TEST(State, LinearAtPTwo) {
    const auto m = annulus(0.3, 8, 32);
    const auto a = solve_state(m, params(2.0), SourceSpec::constant(1.0));
    const auto b = solve_state(m, params(2.0), SourceSpec::constant(3.5));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.field.dof_values().size(); ++i) {
        num = std::max(num, std::abs(b.field.dof_values()[i] - 3.5 * a.field.dof_values()[i]));
        den = std::max(den, std::abs(b.field.dof_values()[i]));
    }
    EXPECT_LE(num / den, 1e-10);
}

TEST(Flux, ZeroSource) {
    const auto s = solve_state(annulus(0.0, 4, 16), params(2.0), SourceSpec::constant(0.0));
    const auto fl = hole_flux(s.field, params(2.0), SourceSpec::constant(0.0), 1);
    EXPECT_NEAR(fl.flux, 0.0, 1e-10);
    EXPECT_EQ(fl.source, 0.0);
}

TEST(Flux, ConcentricAnnulus) {
    const auto s = solve_state(annulus(), params(2.0), SourceSpec::constant(1.0));
    const auto fl = hole_flux(s.field, params(2.0), SourceSpec::constant(1.0), 1);
    EXPECT_NEAR(fl.source, pi / 4.0, 0.01);
    EXPECT_NEAR(fl.source, region_metrics(s.field.mesh()).hole_areas[0], 1e-12);
    EXPECT_LE(std::abs(fl.flux - fl.source), 1e-6 * (1.0 + fl.source));
}

TEST(Flux, EccentricAnnulusPThree) {
    const auto s = solve_state(annulus(0.3), params(3.0), SourceSpec::constant(1.0));
    const auto fl = hole_flux(s.field, params(3.0), SourceSpec::constant(1.0), 1);
    EXPECT_LE(std::abs(fl.flux - fl.source), 1e-6 * (1.0 + fl.source));
    EXPECT_THROW(hole_flux(s.field, params(3.0), SourceSpec::constant(1.0), 2), ParameterError);
}

TEST(Flux, TwoHolesNonUniformSource) {
    const auto m = shared(test_support::two_hole_mesh(4));
    std::vector<double> f(m->triangle_count());
    for (std::size_t t = 0; t < f.size(); ++t) f[t] = 0.5 + static_cast<double>(t % 5) / 4.0;
    const auto src = SourceSpec::per_triangle(f);
    for (double p : {2.0, 2.5}) {
        const auto s = solve_state(m, params(p, 0.7), src);
        for (int h : {1, 2}) {
            const auto fl = hole_flux(s.field, params(p, 0.7), src, h);
            EXPECT_GT(fl.source, 0.0);
            EXPECT_LE(std::abs(fl.flux - fl.source), 1e-6 * (1.0 + fl.source)) << "p=" << p << " hole " << h;
        }
    }
}

TEST(Torsion, ZeroField) { EXPECT_EQ(torsion(Field::zero(annulus(0.0, 2, 8))), 0.0); }

TEST(Torsion, ConcentricAnnulus) {
    const auto s = solve_state(annulus(), params(2.0), SourceSpec::constant(1.0));
    EXPECT_NEAR(torsion(s.field), 0.6171875 * pi, 0.01 * 0.6171875 * pi);
}

TEST(Torsion, RayleighIdentity) {
    for (double p : {1.5, 2.0, 3.0}) {
        const auto sp = params(p);
        const auto s = solve_state(annulus(0.3, 8, 32), sp, SourceSpec::constant(1.0));
        const double T = torsion(s.field);
        EXPECT_NEAR(torsion_rayleigh(s.field, sp), std::pow(T, p - 1.0), 1e-6 * std::pow(T, p - 1.0)) << "p=" << p;
    }
}

TEST(Eigen, ConstantTestFunctionBound) {
    const auto m = disk(8, 32);
    const auto e = solve_eigen(m, params(2.0));
    const auto rm = region_metrics(*m);
    EXPECT_LE(e.lambda, rm.perimeter_exterior / rm.area_total);
    EXPECT_LE(e.lambda, 2.0);
    EXPECT_NEAR(midpoint_power_integral(e.field, 2.0), 1.0, 1e-12);
    for (double v : e.field.dof_values()) EXPECT_GE(v, 0.0);
    for (std::size_t i = 1; i < e.history.size(); ++i) EXPECT_LE(e.history[i], e.history[i - 1] * (1.0 + 1e-12));
}

TEST(Eigen, AnnulusMatchesRadialSolver) {
    const auto e = solve_eigen(annulus(0.0, 16, 64), params(2.0));
    const auto r = solve_radial_eigen(2, 2.0, 1.0, 1.0, 0.5);
    EXPECT_NEAR(e.lambda, r.lambda, 0.02 * r.lambda);
}

TEST(Eigen, SeedIndependence) {
    const auto m = annulus(0.3, 8, 32);
    const auto sp = params(2.5);
    auto d = std::make_shared<const DofMap>(build_dof_map(*m));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<EigenSolution> sols;
    for (int s = 0; s < 2; ++s) {
        std::vector<double> seed(d->free_count);
        for (auto& x : seed) x = u(rng);
        sols.push_back(solve_eigen(m, sp, Field(m, d, seed)));
    }
    EXPECT_NEAR(sols[0].lambda, sols[1].lambda, 1e-4 * sols[0].lambda);
    const auto diff = sols[0].field.with_values([&] {
        std::vector<double> v(d->free_count);
        for (int i = 0; i < d->free_count; ++i) v[i] = sols[0].field.dof_values()[i] - sols[1].field.dof_values()[i];
        return v;
    }());
    EXPECT_LT(std::sqrt(midpoint_power_integral(diff, 2.0)), 1e-3);
}

TEST(Eigen, RejectsBadSeeds) {
    const auto m = disk(2, 8);
    const auto z = Field::zero(m);
    EXPECT_THROW(solve_eigen(m, params(2.0), z), ParameterError);
    std::vector<double> v(z.dofs().free_count, 1.0);
    v[0] = -1.0;
    EXPECT_THROW(solve_eigen(m, params(2.0), z.with_values(v)), ParameterError);
}
