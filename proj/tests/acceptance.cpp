// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "support.hpp"
#include "talenti/talenti.hpp"

using namespace talenti;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(const char* id, const char* title, double budget_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_s > 0.0) o.require(secs < budget_s, "runtime budget");
    if (!o.pass) ++failures;
    std::printf("%s %s  %s (%.2f s)%s\n", id, o.pass ? "PASS" : "FAIL", title, secs, o.detail.str().c_str());
    std::fflush(stdout);
}

std::shared_ptr<const Mesh> annulus(double d, Resolution r = {16, 64}) {
    return std::make_shared<const Mesh>(generate_eccentric_annulus_mesh(1.0, 0.5, d, r.n_radial, r.n_angular));
}

SolveParams params(double p) {
    SolveParams sp;
    sp.p = p;
    sp.beta = 1.0;
    return sp;
}

struct Pipeline {
    std::shared_ptr<const Mesh> mesh;
    StateSolution state;
    RadialProfile profile;
    DistributionFunction mu, phi;
    double fem_error;
};

Pipeline pipeline(double d, double p) {
    auto mesh = annulus(d);
    auto st = solve_state(mesh, params(p), SourceSpec::constant(1.0));
    const auto rm = region_metrics(*mesh);
    auto prof = solve_radial(2, p, 1.0, rm.outer_radius_sharp, rm.hole_radius_sharp, FStarSpec::constant(1.0));
    auto mu = distribution_function_p1(st.field);
    auto phi = radial_distribution(prof);
    const double err = estimate_fem_error(1.0, 0.5, params(p), 1.0, {16, 64});
    return {mesh, std::move(st), std::move(prof), std::move(mu), std::move(phi), err};
}

// every record must satisfy margin >= -rel * |right|
double worst_relative_margin(const std::vector<CheckRecord>& recs, std::size_t& count) {
    double worst = INFINITY;
    for (const auto& r : recs) {
        if (!r.asserting) continue;
        ++count;
        worst = std::min(worst, r.margin / std::abs(r.right));
    }
    return worst;
}

double product_integral(const Field& h, const Field& g) {
    const auto& m = h.mesh();
    double s = 0.0;
    for (std::size_t k = 0; k < m.triangle_count(); ++k) {
        const auto& v = m.triangles()[k].v;
        double diag = 0.0, sh = 0.0, sg = 0.0;
        for (int i : v) {
            diag += h.nodal(i) * g.nodal(i);
            sh += h.nodal(i);
            sg += g.nodal(i);
        }
        s += m.area(k) / 12.0 * (diag + sh * sg);
    }
    return s;
}

double flux_defect(const Field& u, const SolveParams& sp, const SourceSpec& f) {
    double worst = 0.0;
    for (int i = 1; i <= static_cast<int>(u.mesh().hole_count()); ++i) {
        const auto h = hole_flux(u, sp, f, i);
        worst = std::max(worst, std::abs(h.flux - h.source) / (1.0 + std::abs(h.source)));
    }
    return worst;
}

} // namespace

int main() {
    criterion("AC1", "annulus oracle golden values", 1.0, [](Outcome& o) {
        const auto prof = solve_radial(2, 2.0, 1.0, 1.0, 0.5, FStarSpec::constant(1.0));
        const double l1 = radial_distribution(prof).integral();
        o.detail << " v(R0)=" << prof.v_boundary << " c=" << prof.c_bar << " L1/pi=" << l1 / pi;
        o.require(std::abs(prof.v_boundary - 0.5) <= 1e-12, "v(R0) = 0.5");
        o.require(std::abs(prof.c_bar - 0.6875) <= 1e-10, "c = 0.6875");
        o.require(std::abs(l1 - 0.6171875 * pi) <= 1e-8, "L1 = 0.6171875 pi");
    });

    criterion("AC2", "FEM against the radial oracle under refinement", 30.0, [](Outcome& o) {
        const auto prof = solve_radial(2, 2.0, 1.0, 1.0, 0.5, FStarSpec::constant(1.0));
        double prev = INFINITY;
        for (Resolution r : {Resolution{8, 32}, Resolution{16, 64}, Resolution{32, 128}}) {
            const auto m = annulus(0.0, r);
            const auto st = solve_state(m, params(2.0), SourceSpec::constant(1.0));
            double err = 0.0;
            for (std::size_t v = 0; v < m->vertex_count(); ++v) {
                const auto& x = m->vertices()[v];
                err = std::max(err, std::abs(st.field.nodal(v) - prof.value_at(std::hypot(x.x, x.y))));
            }
            const double rel = err / prof.c_bar;
            o.detail << " (" << r.n_radial << "," << r.n_angular << "):" << rel;
            o.require(err < prev, "monotone decrease");
            if (r.n_radial == 16) o.require(rel <= 0.01, "1% at (16,64)");
            prev = err;
        }
    });

    const auto ecc2 = pipeline(0.3, 2.0);

    criterion("AC3", "Lorentz comparison, eccentric annulus, p = 2", 60.0, [&](Outcome& o) {
        const auto tol = Tolerance::from_fem_error(ecc2.fem_error);
        auto recs = verify_lorentz_comparisons(ecc2.mu, ecc2.phi, 2.0, 2, KGrid::automatic(1.0), LorentzCheck::thm1, tol);
        const auto cor = verify_lorentz_comparisons(ecc2.mu, ecc2.phi, 2.0, 2, {}, LorentzCheck::cor12, tol);
        recs.insert(recs.end(), cor.begin(), cor.end());
        std::size_t count = 0;
        const double worst = worst_relative_margin(recs, count);
        o.detail << " records=" << count << " worst margin/rhs=" << worst;
        o.require(count == 2 * KGrid::automatic(1.0).k.size() + 2, "all records asserting");
        o.require(worst >= -1e-3, "margins >= -1e-3 rhs");
    });

    criterion("AC4", "pointwise rearrangement bound, p = 2", 0.0, [&](Outcome& o) {
        const double mass = std::min(ecc2.mu.total_mass(), ecc2.phi.total_mass());
        const double slack = 1e-3 * ecc2.phi.max_value();
        double worst = INFINITY;
        for (int i = 0; i < 1000; ++i) {
            const double s = mass * (i + 0.5) / 1000.0;
            worst = std::min(worst, ecc2.phi.quantile(s) + slack - ecc2.mu.quantile(s));
        }
        o.detail << " worst slack=" << worst;
        o.require(worst >= 0.0, "u* <= v* + 1e-3 max v");
        const auto rec = verify_pointwise(ecc2.mu, ecc2.phi, 2.0, 2, Tolerance::from_fem_error(ecc2.fem_error));
        o.require(rec.size() == 1 && rec[0].pass, "pointwise record");
    });

    criterion("AC5", "unit-source Lorentz comparison, p = 3", 0.0, [](Outcome& o) {
        const auto e = pipeline(0.3, 3.0);
        const double kmax = k_max_unit_source(3.0, 2);
        const auto recs = verify_lorentz_comparisons(e.mu, e.phi, 3.0, 2, KGrid::automatic(kmax), LorentzCheck::thm2ii,
                                                     Tolerance::from_fem_error(e.fem_error));
        std::size_t count = 0;
        const double worst = worst_relative_margin(recs, count);
        o.detail << " k_max=" << kmax << " records=" << count << " worst margin/rhs=" << worst;
        o.require(count == 2 * KGrid::automatic(kmax).k.size(), "all records asserting");
        o.require(worst >= -1e-3, "margins >= -1e-3 rhs");
    });

    criterion("AC6", "level-set differential inequality", 0.0, [&](Outcome& o) {
        for (double p : {1.5, 2.0, 3.0}) {
            const auto prof = solve_radial(2, p, 1.0, 1.0, 0.5, FStarSpec::constant(1.0));
            double worst = 0.0;
            std::size_t interior = 0;
            for (const auto& s : level_set_samples(level_set_model(prof), p, 2, 1.0, prof.fstar)) {
                if (!(s.t > prof.v_m && s.t < prof.c_bar)) continue;
                ++interior;
                worst = std::max(worst, std::abs(s.lhs - s.rhs) / s.rhs);
            }
            o.detail << " radial p=" << p << ":" << worst;
            o.require(interior > 0 && worst <= 1e-4, "radial equality");
        }
        const auto samples = level_set_samples(level_set_model(ecc2.state.field), 2.0, 2, 1.0, FStarSpec::constant(1.0));
        std::size_t good = 0;
        for (const auto& s : samples)
            if (s.lhs <= s.rhs + 1e-3 * s.rhs) ++good;
        const double share = static_cast<double>(good) / samples.size();
        o.detail << " fem share=" << share << " of " << samples.size();
        o.require(share >= 0.99, "99% of FEM midpoints");
    });

    criterion("AC7", "hole flux compatibility", 0.0, [&](Outcome& o) {
        double worst = flux_defect(ecc2.state.field, params(2.0), SourceSpec::constant(1.0));
        for (double p : {1.5, 3.0}) {
            const auto st = solve_state(annulus(0.3), params(p), SourceSpec::constant(1.0));
            worst = std::max(worst, flux_defect(st.field, params(p), SourceSpec::constant(1.0)));
        }
        const auto dir = std::filesystem::temp_directory_path() / "talenti_acceptance";
        std::filesystem::create_directories(dir);
        const auto path = (dir / "two_hole.mesh").string();
        export_mesh(test_support::two_hole_mesh(4), path);
        auto two = std::make_shared<const Mesh>(import_mesh(path));
        std::filesystem::remove_all(dir);
        std::vector<double> tri(two->triangle_count());
        for (std::size_t t = 0; t < tri.size(); ++t) tri[t] = 0.5 + 0.25 * static_cast<double>(t % 5);
        for (const auto& src : {SourceSpec::constant(1.0), SourceSpec::per_triangle(tri)})
            for (double p : {2.0, 3.0}) {
                const auto st = solve_state(two, params(p), src);
                o.require(two->hole_count() == 2, "two holes");
                worst = std::max(worst, flux_defect(st.field, params(p), src));
            }
        o.detail << " worst |flux - source|/(1+|source|)=" << worst;
        o.require(worst <= 1e-6, "flux identity");
    });

    criterion("AC8", "torsion and eigenvalue optimality of the annulus", 0.0, [&](Outcome& o) {
        const auto tol = Tolerance::from_fem_error(ecc2.fem_error);
        const auto e = verify_optimality(ecc2.mesh, params(2.0), 2, tol, ecc2.fem_error, true);
        const double gap = (e.torsion_annulus - e.torsion_domain) / e.torsion_annulus;
        o.detail << " eccentric T gap=" << gap << " (3 err=" << 3.0 * ecc2.fem_error << ") lambda "
                 << *e.lambda_domain << " vs " << *e.lambda_annulus;
        o.require(gap > 3.0 * ecc2.fem_error, "strict torsion gap");
        o.require(*e.lambda_domain > 0.98 * *e.lambda_annulus, "lambda within 2%");
        const auto c = verify_optimality(annulus(0.0), params(2.0), 2, tol, ecc2.fem_error, true);
        const double tdev = std::abs(c.torsion_domain - c.torsion_annulus) / c.torsion_annulus;
        const double ldev = std::abs(*c.lambda_domain - *c.lambda_annulus) / *c.lambda_annulus;
        o.detail << " concentric T dev=" << tdev << " lambda dev=" << ldev;
        o.require(tdev <= tol.rel, "concentric torsion equality");
        o.require(ldev <= 0.02, "concentric eigenvalue equality");
    });

    criterion("AC9", "rearrangement properties on random P1 fields", 60.0, [](Outcome& o) {
        std::mt19937_64 rng(2024);
        const auto meshes = test_support::small_meshes();
        double cav = 0.0, eq = 0.0, hl = -INFINITY, lor = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const auto& m = meshes[i % meshes.size()];
            const auto h = test_support::random_field(m, rng);
            const auto g = test_support::random_field(m, rng);
            const auto mh = distribution_function_p1(h);
            const double l1 = test_support::field_power_integral(h, 1);
            if (l1 == 0.0) continue;
            cav = std::max(cav, std::abs(mh.integral() - l1) / l1);
            for (int p : {1, 2, 3}) {
                const double direct = test_support::field_power_integral(h, p);
                eq = std::max(eq, std::abs(mh.power_integral(p) - direct) / direct);
                lor = std::max(lor, std::abs(mh.lorentz_norm(p, p) - std::pow(direct, 1.0 / p)) / std::pow(direct, 1.0 / p));
            }
            const double rhs = rearranged_product_integral(mh, distribution_function_p1(g));
            hl = std::max(hl, (product_integral(h, g) - rhs) / std::max(1.0, rhs));
        }
        o.detail << " cavalieri=" << cav << " equimeasurable=" << eq << " hardy-littlewood excess=" << hl
                 << " lorentz=" << lor;
        o.require(cav <= 1e-10, "Cavalieri");
        o.require(eq <= 1e-8, "equimeasurability");
        o.require(hl <= 1e-8, "Hardy-Littlewood");
        o.require(lor <= 1e-8, "L^{p,p} = L^p");
    });

    criterion("AC10", "solver correctness", 0.0, [](Outcome& o) {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> gauss(0.0, 1.0);
        double grad_err = 0.0;
        for (double p : {1.5, 2.0, 3.0}) {
            const auto m = annulus(0.3, {4, 16});
            auto d = std::make_shared<const DofMap>(build_dof_map(*m));
            const PLaplaceEnergy e(m, d, p, 1.3, SourceSpec::constant(1.0));
            Eigen::VectorXd x(d->free_count);
            for (auto& v : x) v = 0.5 + 0.3 * gauss(rng);
            const Eigen::VectorXd grad = e.gradient(x, 1e-3);
            for (int k = 0; k < 10; ++k) {
                Eigen::VectorXd dir(d->free_count);
                for (auto& v : dir) v = gauss(rng);
                dir /= dir.norm();
                const double h = 1e-6;
                const double fd = (e.value(x + h * dir, 1e-3) - e.value(x - h * dir, 1e-3)) / (2.0 * h);
                const double an = grad.dot(dir);
                grad_err = std::max(grad_err, std::abs(fd - an) / std::max(1.0, std::abs(an)));
            }
        }
        o.detail << " gradient=" << grad_err;
        o.require(grad_err <= 1e-5, "gradient vs finite differences");

        const auto m = annulus(0.3, {8, 32});
        auto d = std::make_shared<const DofMap>(build_dof_map(*m));
        std::uniform_real_distribution<double> u(0.1, 1.0);
        std::vector<double> lambdas;
        for (int s = 0; s < 3; ++s) {
            std::vector<double> seed(d->free_count);
            for (auto& x : seed) x = u(rng);
            lambdas.push_back(solve_eigen(m, params(2.0), Field(m, d, seed)).lambda);
        }
        lambdas.push_back(solve_eigen(m, params(2.0)).lambda);
        const auto [lo, hi] = std::minmax_element(lambdas.begin(), lambdas.end());
        o.detail << " seed spread=" << (*hi - *lo) / *lo;
        o.require((*hi - *lo) <= 1e-4 * *lo, "seed independence");

        for (const auto& mesh : {annulus(0.3, {8, 32}), annulus(0.0, {8, 32}),
                                 std::make_shared<const Mesh>(generate_disk_mesh(1.0, 8, 32)),
                                 std::make_shared<const Mesh>(test_support::two_hole_mesh(2))})
            for (double p : {2.0, 3.0})
                for (double beta : {0.5, 2.0}) {
                    auto sp = params(p);
                    sp.beta = beta;
                    const auto rm = region_metrics(*mesh);
                    const double lam = solve_eigen(mesh, sp).lambda;
                    o.require(lam <= beta * rm.perimeter_exterior / rm.area_total, "constant test function bound");
                }
    });

    std::printf("%s\n", failures == 0 ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
    return failures == 0 ? 0 : 1;
}
