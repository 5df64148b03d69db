#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "talenti/error.hpp"

namespace talenti {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(b.x - a.x, b.y - a.y); }

/// Twice the signed area of (a, b, c); positive for counter-clockwise order.
inline double cross(const Point2& a, const Point2& b, const Point2& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Triangle with counter-clockwise vertex indices. region 0 is the bulk,
/// region r >= 1 is the r-th hole.
struct Triangle {
    std::array<int, 3> v{};
    int region = 0;

    friend bool operator==(const Triangle&, const Triangle&) = default;
};

/// Tag 0 marks the exterior boundary, tag r >= 1 the interface of hole r.
struct BoundaryEdge {
    std::array<int, 2> v{};
    int tag = 0;

    friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

/// Triangulated cover of the outer domain with meshed holes.
///
/// The constructor validates every structural invariant and throws
/// ValidationError naming the offending entity. Instances are immutable.
class Mesh {
public:
    Mesh(std::vector<Point2> vertices, std::vector<Triangle> triangles,
         std::vector<BoundaryEdge> boundary_edges)
        : vertices_(std::move(vertices)),
          triangles_(std::move(triangles)),
          boundary_edges_(std::move(boundary_edges)) {
        validate();
    }

    [[nodiscard]] const std::vector<Point2>& vertices() const noexcept { return vertices_; }
    [[nodiscard]] const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
    [[nodiscard]] const std::vector<BoundaryEdge>& boundary_edges() const noexcept {
        return boundary_edges_;
    }
    [[nodiscard]] int hole_count() const noexcept { return hole_count_; }
    [[nodiscard]] std::size_t vertex_count() const noexcept { return vertices_.size(); }
    [[nodiscard]] std::size_t triangle_count() const noexcept { return triangles_.size(); }

    [[nodiscard]] double area(std::size_t t) const {
        const auto& tri = triangles_[t];
        return 0.5 * cross(vertices_[tri.v[0]], vertices_[tri.v[1]], vertices_[tri.v[2]]);
    }

    [[nodiscard]] double edge_length(std::size_t e) const {
        const auto& edge = boundary_edges_[e];
        return distance(vertices_[edge.v[0]], vertices_[edge.v[1]]);
    }

    /// Indices of boundary edges with the given tag.
    [[nodiscard]] std::vector<std::size_t> edges_with_tag(int tag) const {
        std::vector<std::size_t> out;
        for (std::size_t e = 0; e < boundary_edges_.size(); ++e)
            if (boundary_edges_[e].tag == tag) out.push_back(e);
        return out;
    }

    friend bool operator==(const Mesh& a, const Mesh& b) {
        return a.vertices_ == b.vertices_ && a.triangles_ == b.triangles_ &&
               a.boundary_edges_ == b.boundary_edges_;
    }

private:
    void validate();

    std::vector<Point2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<BoundaryEdge> boundary_edges_;
    int hole_count_ = 0;
};

namespace detail {

using EdgeKey = std::pair<int, int>;

inline EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

inline std::string edge_name(const EdgeKey& k) {
    return "(" + std::to_string(k.first) + ", " + std::to_string(k.second) + ")";
}

// Checks that the edge set forms exactly one closed loop.
inline void check_single_loop(const std::vector<EdgeKey>& edges, int tag) {
    const std::string label = "boundary loop with tag " + std::to_string(tag);
    if (edges.size() < 3) throw ValidationError(label + " has fewer than 3 edges");
    std::map<int, std::vector<int>> adj;
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (const auto& [v, nbrs] : adj) {
        if (nbrs.size() != 2)
            throw ValidationError(label + " is not closed: vertex " + std::to_string(v) + " has " +
                                  std::to_string(nbrs.size()) + " incident loop edges");
    }
    // walk the loop from its first vertex
    const int start = adj.begin()->first;
    int prev = -1;
    int cur = start;
    std::size_t steps = 0;
    do {
        const auto& nb = adj[cur];
        const int next = (nb[0] != prev) ? nb[0] : nb[1];
        prev = cur;
        cur = next;
        ++steps;
    } while (cur != start && steps <= edges.size());
    if (steps != edges.size())
        throw ValidationError(label + " splits into several loops");
}

} // namespace detail

inline void Mesh::validate() {
    using detail::EdgeKey;
    const int nv = static_cast<int>(vertices_.size());
    if (nv == 0) throw ValidationError("mesh has no vertices");
    if (triangles_.empty()) throw ValidationError("mesh has no triangles");

    int max_region = 0;
    std::vector<char> used(vertices_.size(), 0);
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int v : tri.v) {
            if (v < 0 || v >= nv)
                throw ValidationError("triangle " + std::to_string(t) + " references vertex " +
                                      std::to_string(v) + " out of range");
            used[v] = 1;
        }
        if (tri.region < 0)
            throw ValidationError("triangle " + std::to_string(t) + " has negative region");
        max_region = std::max(max_region, tri.region);
        if (!(area(t) > 0.0))
            throw ValidationError("triangle " + std::to_string(t) +
                                  " has non-positive signed area");
    }
    for (int v = 0; v < nv; ++v)
        if (!used[v]) throw ValidationError("vertex " + std::to_string(v) + " is not used by any triangle");

    hole_count_ = max_region;
    std::vector<std::size_t> region_size(hole_count_ + 1, 0);
    for (const auto& tri : triangles_) ++region_size[tri.region];
    for (int r = 0; r <= hole_count_; ++r)
        if (region_size[r] == 0)
            throw ValidationError("region " + std::to_string(r) + " has no triangles");

    // edge -> adjacent triangles
    std::map<EdgeKey, std::vector<int>> adjacency;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& v = triangles_[t].v;
        for (int i = 0; i < 3; ++i) {
            auto key = detail::edge_key(v[i], v[(i + 1) % 3]);
            auto& list = adjacency[key];
            list.push_back(static_cast<int>(t));
            if (list.size() > 2)
                throw ValidationError("non-manifold edge " + detail::edge_name(key));
        }
    }

    // holes must be compactly contained and pairwise disjoint
    std::vector<int> vertex_hole(vertices_.size(), 0);
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        if (tri.region == 0) continue;
        for (int v : tri.v) {
            if (vertex_hole[v] != 0 && vertex_hole[v] != tri.region)
                throw ValidationError("vertex " + std::to_string(v) + " is shared by holes " +
                                      std::to_string(vertex_hole[v]) + " and " +
                                      std::to_string(tri.region));
            vertex_hole[v] = tri.region;
        }
    }

    std::map<EdgeKey, int> tags;
    for (std::size_t e = 0; e < boundary_edges_.size(); ++e) {
        const auto& edge = boundary_edges_[e];
        for (int v : edge.v)
            if (v < 0 || v >= nv)
                throw ValidationError("boundary edge " + std::to_string(e) + " references vertex " +
                                      std::to_string(v) + " out of range");
        if (edge.tag < 0 || edge.tag > hole_count_)
            throw ValidationError("boundary edge " + std::to_string(e) + " has tag " +
                                  std::to_string(edge.tag) + " outside 0.." +
                                  std::to_string(hole_count_));
        const auto key = detail::edge_key(edge.v[0], edge.v[1]);
        if (!tags.emplace(key, edge.tag).second)
            throw ValidationError("boundary edge " + detail::edge_name(key) + " listed twice");
        const auto it = adjacency.find(key);
        if (it == adjacency.end())
            throw ValidationError("boundary edge " + detail::edge_name(key) + " is not a mesh edge");
    }

    std::vector<std::vector<EdgeKey>> loops(hole_count_ + 1);
    for (const auto& [key, tris] : adjacency) {
        const auto tag_it = tags.find(key);
        if (tris.size() == 1) {
            if (triangles_[tris[0]].region != 0)
                throw ValidationError("hole " + std::to_string(triangles_[tris[0]].region) +
                                      " touches the exterior boundary at edge " +
                                      detail::edge_name(key));
            if (tag_it == tags.end() || tag_it->second != 0)
                throw ValidationError("exterior edge " + detail::edge_name(key) +
                                      " is not tagged 0");
            loops[0].push_back(key);
            continue;
        }
        const int ra = triangles_[tris[0]].region;
        const int rb = triangles_[tris[1]].region;
        if (ra == rb) {
            if (tag_it != tags.end())
                throw ValidationError("interior edge " + detail::edge_name(key) + " is tagged " +
                                      std::to_string(tag_it->second));
            continue;
        }
        if (ra != 0 && rb != 0)
            throw ValidationError("edge " + detail::edge_name(key) + " separates holes " +
                                  std::to_string(ra) + " and " + std::to_string(rb));
        const int hole = std::max(ra, rb);
        if (tag_it == tags.end() || tag_it->second != hole)
            throw ValidationError("interface edge " + detail::edge_name(key) + " of hole " +
                                  std::to_string(hole) + " is not tagged " + std::to_string(hole));
        loops[hole].push_back(key);
    }
    // every listed edge was matched above, so a loop count mismatch means a wrong tag
    std::size_t matched = 0;
    for (const auto& l : loops) matched += l.size();
    if (matched != boundary_edges_.size())
        throw ValidationError("boundary edge list contains edges with inconsistent tags");

    for (int tag = 0; tag <= hole_count_; ++tag) detail::check_single_loop(loops[tag], tag);
}

/// Which built-in geometry to construct.
enum class DomainKind { disk, concentric_annulus, eccentric_annulus, external_mesh };

struct Resolution {
    int n_radial = 16;
    int n_angular = 64;
};

struct DomainSpec {
    DomainKind kind = DomainKind::disk;
    double R0 = 1.0;
    double R1 = 0.0;
    double d = 0.0;
    std::string mesh_path;
    Resolution resolution;
};

namespace detail {

inline void check_resolution(int n_radial, int n_angular) {
    if (n_radial < 2) throw ParameterError("n_radial must be >= 2");
    if (n_angular < 8) throw ParameterError("n_angular must be >= 8");
}

inline Point2 polar(double cx, double r, double theta) {
    return {cx + r * std::cos(theta), r * std::sin(theta)};
}

} // namespace detail

/// Structured polar mesh of the disk of radius R0 centred at the origin.
inline Mesh generate_disk_mesh(double R0, int n_radial, int n_angular) {
    if (!(R0 > 0.0)) throw ParameterError("disk radius must be positive");
    detail::check_resolution(n_radial, n_angular);

    const double dtheta = 2.0 * std::numbers::pi / n_angular;
    std::vector<Point2> verts;
    verts.reserve(1 + static_cast<std::size_t>(n_radial) * n_angular);
    verts.push_back({0.0, 0.0});
    for (int k = 1; k <= n_radial; ++k)
        for (int j = 0; j < n_angular; ++j)
            verts.push_back(detail::polar(0.0, R0 * k / n_radial, j * dtheta));

    auto ring = [&](int k, int j) { return 1 + (k - 1) * n_angular + (j % n_angular); };

    std::vector<Triangle> tris;
    for (int j = 0; j < n_angular; ++j) tris.push_back({{0, ring(1, j), ring(1, j + 1)}, 0});
    for (int k = 1; k < n_radial; ++k) {
        for (int j = 0; j < n_angular; ++j) {
            const int a = ring(k, j), b = ring(k, j + 1);
            const int c = ring(k + 1, j + 1), d = ring(k + 1, j);
            tris.push_back({{a, d, c}, 0});
            tris.push_back({{a, c, b}, 0});
        }
    }
    std::vector<BoundaryEdge> edges;
    for (int j = 0; j < n_angular; ++j)
        edges.push_back({{ring(n_radial, j), ring(n_radial, j + 1)}, 0});
    return Mesh(std::move(verts), std::move(tris), std::move(edges));
}

/// Annulus between the centred circle of radius R0 and the hole of radius R1
/// centred at (d, 0). Ring k interpolates linearly between the two circles,
/// the hole itself is a fan around its centre tagged region 1.
inline Mesh generate_eccentric_annulus_mesh(double R0, double R1, double d, int n_radial,
                                            int n_angular) {
    if (!(R1 > 0.0)) throw ParameterError("hole radius must be positive");
    if (!(d >= 0.0)) throw ParameterError("hole offset must be non-negative");
    if (!(d + R1 < R0)) throw ParameterError("hole must lie strictly inside the outer disk (d + R1 < R0)");
    detail::check_resolution(n_radial, n_angular);

    const double dtheta = 2.0 * std::numbers::pi / n_angular;
    std::vector<Point2> verts;
    verts.reserve(static_cast<std::size_t>(n_radial + 1) * n_angular + 1);
    for (int k = 0; k <= n_radial; ++k) {
        const double s = static_cast<double>(k) / n_radial;
        const double cx = d * (1.0 - s);
        const double r = (1.0 - s) * R1 + s * R0;
        for (int j = 0; j < n_angular; ++j) verts.push_back(detail::polar(cx, r, j * dtheta));
    }
    const int centre = static_cast<int>(verts.size());
    verts.push_back({d, 0.0});

    auto ring = [&](int k, int j) { return k * n_angular + (j % n_angular); };

    std::vector<Triangle> tris;
    for (int j = 0; j < n_angular; ++j) tris.push_back({{centre, ring(0, j), ring(0, j + 1)}, 1});
    for (int k = 0; k < n_radial; ++k) {
        for (int j = 0; j < n_angular; ++j) {
            const int a = ring(k, j), b = ring(k, j + 1);
            const int c = ring(k + 1, j + 1), e = ring(k + 1, j);
            tris.push_back({{a, e, c}, 0});
            tris.push_back({{a, c, b}, 0});
        }
    }
    std::vector<BoundaryEdge> edges;
    for (int j = 0; j < n_angular; ++j) edges.push_back({{ring(n_radial, j), ring(n_radial, j + 1)}, 0});
    for (int j = 0; j < n_angular; ++j) edges.push_back({{ring(0, j), ring(0, j + 1)}, 1});
    return Mesh(std::move(verts), std::move(tris), std::move(edges));
}

struct RegionMetrics {
    double area_total = 0.0;
    std::vector<double> hole_areas;
    double area_bulk = 0.0;
    double perimeter_exterior = 0.0;
    double outer_radius_sharp = 0.0; ///< radius of the disk with the measure of the outer domain
    double hole_radius_sharp = 0.0;  ///< radius of the disk with the total hole measure

    [[nodiscard]] double total_hole_area() const {
        return std::accumulate(hole_areas.begin(), hole_areas.end(), 0.0);
    }
};

inline RegionMetrics region_metrics(const Mesh& mesh) {
    RegionMetrics m;
    m.hole_areas.assign(mesh.hole_count(), 0.0);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const double a = mesh.area(t);
        m.area_total += a;
        const int r = mesh.triangles()[t].region;
        if (r == 0)
            m.area_bulk += a;
        else
            m.hole_areas[r - 1] += a;
    }
    for (std::size_t e : mesh.edges_with_tag(0)) m.perimeter_exterior += mesh.edge_length(e);
    m.outer_radius_sharp = std::sqrt(m.area_total / std::numbers::pi);
    m.hole_radius_sharp = std::sqrt(m.total_hole_area() / std::numbers::pi);
    return m;
}

} // namespace talenti
