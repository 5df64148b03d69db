#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "talenti/fem.hpp"
#include "talenti/geometry.hpp"
#include "talenti/mesh_io.hpp"

namespace test_support {

/// MESH v1 text of the rectangle [0,4]x[0,2] split into right triangles,
/// with two square holes [0.5,1.5]x[0.5,1.5] (region 1) and [2.5,3.5]x[0.5,1.5] (region 2).
inline std::string two_hole_mesh_text(int per_unit = 4) {
    const int nx = 4 * per_unit, ny = 2 * per_unit;
    const double h = 1.0 / per_unit;
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    auto region_of = [&](int i, int j) {
        const double cx = (i + 0.5) * h, cy = (j + 0.5) * h;
        if (cy > 0.5 && cy < 1.5) {
            if (cx > 0.5 && cx < 1.5) return 1;
            if (cx > 2.5 && cx < 3.5) return 2;
        }
        return 0;
    };
    std::ostringstream out;
    out.precision(17);
    out << "MESH v1\n# two-hole rectangle\nvertices " << (nx + 1) * (ny + 1) << '\n';
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) out << i * h << ' ' << j * h << '\n';
    out << "triangles " << 2 * nx * ny << '\n';
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int r = region_of(i, j);
            out << id(i, j) << ' ' << id(i + 1, j) << ' ' << id(i + 1, j + 1) << ' ' << r << '\n';
            out << id(i, j) << ' ' << id(i + 1, j + 1) << ' ' << id(i, j + 1) << ' ' << r << '\n';
        }
    std::vector<std::string> edges;
    auto edge = [&](int a, int b, int tag) {
        edges.push_back(std::to_string(a) + ' ' + std::to_string(b) + ' ' + std::to_string(tag));
    };
    for (int i = 0; i < nx; ++i) {
        edge(id(i, 0), id(i + 1, 0), 0);
        edge(id(i + 1, ny), id(i, ny), 0);
    }
    for (int j = 0; j < ny; ++j) {
        edge(id(nx, j), id(nx, j + 1), 0);
        edge(id(0, j + 1), id(0, j), 0);
    }
    // interfaces: horizontal and vertical grid edges between a hole cell and a bulk cell
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int r = region_of(i, j);
            if (r == 0) continue;
            if (region_of(i, j - 1) == 0) edge(id(i, j), id(i + 1, j), r);
            if (region_of(i, j + 1) == 0) edge(id(i, j + 1), id(i + 1, j + 1), r);
            if (region_of(i - 1, j) == 0) edge(id(i, j), id(i, j + 1), r);
            if (region_of(i + 1, j) == 0) edge(id(i + 1, j), id(i + 1, j + 1), r);
        }
    out << "boundary_edges " << edges.size() << '\n';
    for (const auto& e : edges) out << e << '\n';
    return out.str();
}

inline talenti::Mesh two_hole_mesh(int per_unit = 4) {
    std::istringstream in(two_hole_mesh_text(per_unit));
    return talenti::read_mesh(in);
}

inline std::string unit_square_text() {
    return "MESH v1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2 0\n0 2 3 0\n"
           "boundary_edges 4\n0 1 0\n1 2 0\n2 3 0\n3 0 0\n";
}

inline talenti::Mesh unit_square() {
    std::istringstream in(unit_square_text());
    return talenti::read_mesh(in);
}

/// Small meshes used by the property suites.
inline std::vector<std::shared_ptr<const talenti::Mesh>> small_meshes() {
    using namespace talenti;
    return {std::make_shared<const Mesh>(unit_square()),
            std::make_shared<const Mesh>(generate_disk_mesh(1.0, 2, 8)),
            std::make_shared<const Mesh>(generate_disk_mesh(1.3, 3, 12)),
            std::make_shared<const Mesh>(generate_eccentric_annulus_mesh(1.0, 0.4, 0.2, 3, 12)),
            std::make_shared<const Mesh>(generate_eccentric_annulus_mesh(2.0, 0.5, 0.0, 2, 8)),
            std::make_shared<const Mesh>(two_hole_mesh(2))};
}

/// Random non-negative field; about a fifth of the dofs are exact zeros and
/// some values are repeated to exercise ties.
inline talenti::Field random_field(const std::shared_ptr<const talenti::Mesh>& mesh, std::mt19937_64& rng) {
    auto dofs = std::make_shared<const talenti::DofMap>(talenti::build_dof_map(*mesh));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(dofs->free_count);
    for (auto& x : v) {
        const double r = u(rng);
        x = r < 0.2 ? 0.0 : (r < 0.3 ? 0.5 : 2.0 * u(rng));
    }
    return talenti::Field(mesh, dofs, std::move(v));
}

/// int_T (linear)^p for vertex values a, b, c and integer p:
/// 2A p!/(p+2)! sum_{i+j+k=p} a^i b^j c^k.
inline double simplex_power_integral(double area, double a, double b, double c, int p) {
    double s = 0.0;
    for (int i = 0; i <= p; ++i)
        for (int j = 0; i + j <= p; ++j) s += std::pow(a, i) * std::pow(b, j) * std::pow(c, p - i - j);
    return 2.0 * area / ((p + 1.0) * (p + 2.0)) * s; // p!/(p+2)! = 1/((p+1)(p+2))
}

inline double field_power_integral(const talenti::Field& f, int p) {
    const auto& m = f.mesh();
    double s = 0.0;
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        const auto& v = m.triangles()[t].v;
        s += simplex_power_integral(m.area(t), f.nodal(v[0]), f.nodal(v[1]), f.nodal(v[2]), p);
    }
    return s;
}

} // namespace test_support
