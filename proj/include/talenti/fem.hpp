#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "talenti/error.hpp"
#include "talenti/geometry.hpp"
#include "talenti/quadrature.hpp"

namespace talenti {

/// Degrees of freedom of the hole-constant P1 space: every vertex of the
/// closure of hole r collapses onto the single dof hole_dofs[r-1].
struct DofMap {
    std::vector<int> node_to_dof;
    std::vector<int> hole_dofs;
    int free_count = 0;
};

inline DofMap build_dof_map(const Mesh& mesh) {
    const int m = mesh.hole_count();
    std::vector<int> vertex_hole(mesh.vertex_count(), 0);
    std::vector<std::size_t> hole_tris(m + 1, 0);
    for (const auto& t : mesh.triangles()) {
        ++hole_tris[t.region];
        if (t.region == 0) continue;
        for (int v : t.v) vertex_hole[v] = t.region;
    }
    for (int r = 1; r <= m; ++r)
        if (hole_tris[r] == 0) throw ValidationError("hole " + std::to_string(r) + " has no triangles");

    DofMap map;
    map.node_to_dof.assign(mesh.vertex_count(), -1);
    map.hole_dofs.assign(m, -1);
    int next = 0;
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        const int r = vertex_hole[v];
        if (r == 0) {
            map.node_to_dof[v] = next++;
            continue;
        }
        if (map.hole_dofs[r - 1] < 0) map.hole_dofs[r - 1] = next++;
        map.node_to_dof[v] = map.hole_dofs[r - 1];
    }
    map.free_count = next;
    return map;
}

/// Finite element coefficients over a mesh in the hole-constant space.
class Field {
public:
    Field(std::shared_ptr<const Mesh> mesh, std::shared_ptr<const DofMap> dofs, std::vector<double> values)
        : mesh_(std::move(mesh)), dofs_(std::move(dofs)), values_(std::move(values)) {
        if (!mesh_ || !dofs_) throw ContractError("field needs a mesh and a dof map");
        if (values_.size() != static_cast<std::size_t>(dofs_->free_count))
            throw ContractError("field has " + std::to_string(values_.size()) + " values for " +
                                std::to_string(dofs_->free_count) + " dofs");
    }

    /// Zero field on `mesh`.
    static Field zero(std::shared_ptr<const Mesh> mesh) {
        auto dofs = std::make_shared<const DofMap>(build_dof_map(*mesh));
        const auto n = static_cast<std::size_t>(dofs->free_count);
        return Field(std::move(mesh), std::move(dofs), std::vector<double>(n, 0.0));
    }

    [[nodiscard]] const Mesh& mesh() const noexcept { return *mesh_; }
    [[nodiscard]] const std::shared_ptr<const Mesh>& mesh_ptr() const noexcept { return mesh_; }
    [[nodiscard]] const DofMap& dofs() const noexcept { return *dofs_; }
    [[nodiscard]] const std::shared_ptr<const DofMap>& dofs_ptr() const noexcept { return dofs_; }
    [[nodiscard]] std::span<const double> dof_values() const noexcept { return values_; }

    [[nodiscard]] double nodal(std::size_t vertex) const { return values_[dofs_->node_to_dof[vertex]]; }

    [[nodiscard]] std::vector<double> nodal_values() const {
        std::vector<double> out(mesh_->vertex_count());
        for (std::size_t v = 0; v < out.size(); ++v) out[v] = nodal(v);
        return out;
    }

    /// Constant c_i of hole i (1-based, as in region tags).
    [[nodiscard]] double hole_constant(int hole) const {
        if (hole < 1 || hole > mesh_->hole_count())
            throw ParameterError("hole index " + std::to_string(hole) + " out of range");
        return values_[dofs_->hole_dofs[hole - 1]];
    }

    [[nodiscard]] Field with_values(std::vector<double> values) const {
        return Field(mesh_, dofs_, std::move(values));
    }

    [[nodiscard]] bool same_space(const Field& other) const noexcept {
        return mesh_ == other.mesh_ || *mesh_ == *other.mesh_;
    }

private:
    std::shared_ptr<const Mesh> mesh_;
    std::shared_ptr<const DofMap> dofs_;
    std::vector<double> values_;
};

struct SolveParams {
    double p = 2.0;
    double beta = 1.0;
    std::vector<double> epsilon_schedule{1e-1, 1e-2, 1e-3, 1e-4};
    double newton_tol = 1e-10;
    int max_newton_iters = 100;
    double line_search_factor = 0.5;
    int line_search_max_steps = 30;
    int max_eigen_iters = 500;

    [[nodiscard]] double epsilon_min() const { return epsilon_schedule.back(); }

    void validate() const {
        if (!(p > 1.0) || p > 10.0) throw ParameterError("p must lie in (1, 10]");
        if (!(beta > 0.0)) throw ParameterError("beta must be positive");
        if (epsilon_schedule.empty()) throw ParameterError("epsilon schedule is empty");
        for (std::size_t i = 0; i < epsilon_schedule.size(); ++i) {
            if (!(epsilon_schedule[i] > 0.0)) throw ParameterError("epsilon values must be positive");
            if (i > 0 && !(epsilon_schedule[i] < epsilon_schedule[i - 1]))
                throw ParameterError("epsilon schedule must be strictly decreasing");
        }
        if (!(newton_tol > 0.0)) throw ParameterError("newton_tol must be positive");
        if (max_newton_iters < 1) throw ParameterError("max_newton_iters must be >= 1");
        if (!(line_search_factor > 0.0 && line_search_factor < 1.0))
            throw ParameterError("line search factor must lie in (0, 1)");
        if (line_search_max_steps < 1) throw ParameterError("line_search_max_steps must be >= 1");
    }
};

/// Non-negative source term.
struct SourceSpec {
    enum class Kind {
        constant,
        radial_profile, ///< g(|x - centre|), piecewise linear table, clamped at the ends
        per_triangle,
        samples ///< values at the three edge midpoints of every triangle
    };

    Kind kind = Kind::constant;
    double value = 0.0;
    Point2 centre;
    std::vector<std::pair<double, double>> table;
    std::vector<double> values;

    static SourceSpec constant(double v) {
        SourceSpec s;
        s.value = v;
        return s;
    }
    static SourceSpec radial_profile(Point2 centre, std::vector<std::pair<double, double>> table) {
        SourceSpec s;
        s.kind = Kind::radial_profile;
        s.centre = centre;
        s.table = std::move(table);
        return s;
    }
    static SourceSpec per_triangle(std::vector<double> v) {
        SourceSpec s;
        s.kind = Kind::per_triangle;
        s.values = std::move(v);
        return s;
    }
    static SourceSpec samples(std::vector<double> v) {
        SourceSpec s;
        s.kind = Kind::samples;
        s.values = std::move(v);
        return s;
    }

    [[nodiscard]] bool is_constant(double v) const { return kind == Kind::constant && value == v; }

    void validate(const Mesh& mesh) const {
        auto nonneg = [](double x) { return x >= 0.0 && std::isfinite(x); };
        switch (kind) {
        case Kind::constant:
            if (!nonneg(value)) throw ParameterError("source must be non-negative");
            break;
        case Kind::radial_profile:
            if (table.empty()) throw ParameterError("radial source table is empty");
            for (std::size_t i = 0; i < table.size(); ++i) {
                if (!nonneg(table[i].second)) throw ParameterError("source must be non-negative");
                if (i > 0 && !(table[i].first > table[i - 1].first))
                    throw ParameterError("radial source table radii must increase");
            }
            break;
        case Kind::per_triangle:
            if (values.size() != mesh.triangle_count())
                throw ParameterError("per-triangle source needs one value per triangle");
            for (double x : values)
                if (!nonneg(x)) throw ParameterError("source must be non-negative");
            break;
        case Kind::samples:
            if (values.size() != 3 * mesh.triangle_count())
                throw ParameterError("sampled source needs three values per triangle");
            for (double x : values)
                if (!nonneg(x)) throw ParameterError("source must be non-negative");
            break;
        }
    }

    /// f at edge midpoint `q` (edge q joins local vertices q and q+1) of triangle `t`.
    [[nodiscard]] double at_midpoint(const Mesh& mesh, std::size_t t, int q) const {
        switch (kind) {
        case Kind::constant: return value;
        case Kind::per_triangle: return values[t];
        case Kind::samples: return values[3 * t + q];
        case Kind::radial_profile: {
            const auto& tri = mesh.triangles()[t];
            const auto& a = mesh.vertices()[tri.v[q]];
            const auto& b = mesh.vertices()[tri.v[(q + 1) % 3]];
            const double r = std::hypot(0.5 * (a.x + b.x) - centre.x, 0.5 * (a.y + b.y) - centre.y);
            return interpolate(r);
        }
        }
        return 0.0;
    }

private:
    [[nodiscard]] double interpolate(double r) const {
        if (r <= table.front().first) return table.front().second;
        if (r >= table.back().first) return table.back().second;
        const auto it = std::upper_bound(table.begin(), table.end(), r,
                                         [](double x, const auto& e) { return x < e.first; });
        const auto& [r1, g1] = *it;
        const auto& [r0, g0] = *(it - 1);
        return g0 + (g1 - g0) * (r - r0) / (r1 - r0);
    }
};

/// Per-triangle geometric data of the P1 discretisation.
struct ElementGeometry {
    double area = 0.0;
    std::array<std::array<double, 2>, 3> grad{}; ///< gradients of the barycentric coordinates
};

inline std::vector<ElementGeometry> element_geometry(const Mesh& mesh) {
    std::vector<ElementGeometry> out(mesh.triangle_count());
    for (std::size_t t = 0; t < out.size(); ++t) {
        const auto& v = mesh.triangles()[t].v;
        const auto& p0 = mesh.vertices()[v[0]];
        const auto& p1 = mesh.vertices()[v[1]];
        const auto& p2 = mesh.vertices()[v[2]];
        const double a2 = cross(p0, p1, p2);
        auto& g = out[t];
        g.area = 0.5 * a2;
        g.grad[0] = {(p1.y - p2.y) / a2, (p2.x - p1.x) / a2};
        g.grad[1] = {(p2.y - p0.y) / a2, (p0.x - p2.x) / a2};
        g.grad[2] = {(p0.y - p1.y) / a2, (p1.x - p0.x) / a2};
    }
    return out;
}

/// Load data of a source: nodal load vector of the edge-midpoint rule, and
/// the (value, weight) samples it is built from.
struct LoadData {
    std::vector<double> nodal;                 ///< b_v = sum over midpoints of (A/3) f(m) phi_v(m)
    std::vector<std::array<double, 3>> sample; ///< f at the three edge midpoints per triangle
    std::vector<double> region_total;          ///< integral of f over region r

    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double x : region_total) s += x;
        return s;
    }
};

inline LoadData assemble_load(const Mesh& mesh, const SourceSpec& f) {
    LoadData load;
    load.nodal.assign(mesh.vertex_count(), 0.0);
    load.sample.resize(mesh.triangle_count());
    load.region_total.assign(mesh.hole_count() + 1, 0.0);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles()[t];
        const double w = mesh.area(t) / 3.0;
        for (int q = 0; q < 3; ++q) {
            const double fq = f.at_midpoint(mesh, t, q);
            load.sample[t][q] = fq;
            load.nodal[tri.v[q]] += 0.5 * w * fq;
            load.nodal[tri.v[(q + 1) % 3]] += 0.5 * w * fq;
            load.region_total[tri.region] += w * fq;
        }
    }
    return load;
}

namespace detail {

inline double signed_pow(double w, double e) {
    if (w == 0.0) return 0.0;
    return std::copysign(std::pow(std::abs(w), e), w);
}

} // namespace detail

/// Regularised Robin p-Dirichlet energy over the hole-constant P1 space:
///
///   F_eps(w) = 1/p int (eps^2 + |grad w|^2)^{p/2} + beta/p int_{ext} |w|^p - int f w
///
/// Dof vectors are Eigen vectors indexed by DofMap.
class PLaplaceEnergy {
public:
    using Vector = Eigen::VectorXd;
    using Matrix = Eigen::SparseMatrix<double>;

    PLaplaceEnergy(std::shared_ptr<const Mesh> mesh, std::shared_ptr<const DofMap> dofs, double p,
                   double beta, const SourceSpec& f)
        : mesh_(std::move(mesh)),
          dofs_(std::move(dofs)),
          geom_(element_geometry(*mesh_)),
          exterior_(mesh_->edges_with_tag(0)),
          load_(assemble_load(*mesh_, f)),
          p_(p),
          beta_(beta) {
        dof_load_ = Vector::Zero(dofs_->free_count);
        for (std::size_t v = 0; v < mesh_->vertex_count(); ++v)
            dof_load_[dofs_->node_to_dof[v]] += load_.nodal[v];
    }

    [[nodiscard]] int size() const noexcept { return dofs_->free_count; }
    [[nodiscard]] double p() const noexcept { return p_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] const LoadData& load() const noexcept { return load_; }
    [[nodiscard]] const Vector& dof_load() const noexcept { return dof_load_; }
    [[nodiscard]] const std::vector<ElementGeometry>& geometry() const noexcept { return geom_; }

    /// Element gradient of the field on triangle t.
    [[nodiscard]] std::array<double, 2> element_gradient(const Vector& x, std::size_t t) const {
        const auto& tri = mesh_->triangles()[t];
        const auto& g = geom_[t];
        std::array<double, 2> out{0.0, 0.0};
        for (int i = 0; i < 3; ++i) {
            const double w = x[dofs_->node_to_dof[tri.v[i]]];
            out[0] += w * g.grad[i][0];
            out[1] += w * g.grad[i][1];
        }
        return out;
    }

    /// 1/p int (eps^2 + |grad w|^2)^{p/2}
    [[nodiscard]] double gradient_term(const Vector& x, double eps) const {
        double sum = 0.0;
        for (std::size_t t = 0; t < geom_.size(); ++t) {
            const auto g = element_gradient(x, t);
            const double s2 = eps * eps + g[0] * g[0] + g[1] * g[1];
            sum += geom_[t].area * std::pow(s2, 0.5 * p_);
        }
        return sum / p_;
    }

    /// int_{ext} |w|^p with 4-point Gauss per edge (no beta/p factor).
    [[nodiscard]] double boundary_power(const Vector& x) const {
        const auto& rule = quad::unit_gauss<4>();
        double sum = 0.0;
        for (std::size_t e : exterior_) {
            const auto& edge = mesh_->boundary_edges()[e];
            const double a = x[dofs_->node_to_dof[edge.v[0]]];
            const double b = x[dofs_->node_to_dof[edge.v[1]]];
            double s = 0.0;
            for (int q = 0; q < 4; ++q) {
                const double w = a + (b - a) * rule.nodes[q];
                s += rule.weights[q] * std::pow(std::abs(w), p_);
            }
            sum += mesh_->edge_length(e) * s;
        }
        return sum;
    }

    [[nodiscard]] double load_term(const Vector& x) const { return dof_load_.dot(x); }

    [[nodiscard]] double value(const Vector& x, double eps) const {
        return gradient_term(x, eps) + beta_ / p_ * boundary_power(x) - load_term(x);
    }

    /// Gradient with respect to the dofs, optionally without the load term.
    [[nodiscard]] Vector gradient(const Vector& x, double eps, bool with_load = true) const {
        Vector g = Vector::Zero(size());
        for (std::size_t t = 0; t < geom_.size(); ++t) {
            const auto& tri = mesh_->triangles()[t];
            const auto ge = element_gradient(x, t);
            const double s2 = eps * eps + ge[0] * ge[0] + ge[1] * ge[1];
            if (s2 == 0.0) continue;
            const double a = geom_[t].area * std::pow(s2, 0.5 * p_ - 1.0);
            for (int i = 0; i < 3; ++i) {
                const auto& gi = geom_[t].grad[i];
                g[dofs_->node_to_dof[tri.v[i]]] += a * (ge[0] * gi[0] + ge[1] * gi[1]);
            }
        }
        const auto& rule = quad::unit_gauss<4>();
        for (std::size_t e : exterior_) {
            const auto& edge = mesh_->boundary_edges()[e];
            const int da = dofs_->node_to_dof[edge.v[0]];
            const int db = dofs_->node_to_dof[edge.v[1]];
            const double wa = x[da], wb = x[db];
            const double len = mesh_->edge_length(e);
            for (int q = 0; q < 4; ++q) {
                const double s = rule.nodes[q];
                const double c = beta_ * len * rule.weights[q] * detail::signed_pow(wa + (wb - wa) * s, p_ - 1.0);
                g[da] += c * (1.0 - s);
                g[db] += c * s;
            }
        }
        if (with_load) g -= dof_load_;
        return g;
    }

    /// Hessian of the regularised energy. The boundary weight |w|^{p-2} is
    /// replaced by (eps^2 + w^2)^{(p-2)/2} so the matrix stays bounded and
    /// positive definite for every p > 1.
    [[nodiscard]] Matrix hessian(const Vector& x, double eps) const {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(9 * geom_.size() + 4 * exterior_.size());
        for (std::size_t t = 0; t < geom_.size(); ++t) {
            const auto& tri = mesh_->triangles()[t];
            const auto& gd = geom_[t].grad;
            const auto ge = element_gradient(x, t);
            const double s2 = eps * eps + ge[0] * ge[0] + ge[1] * ge[1];
            const double a = geom_[t].area * std::pow(s2, 0.5 * p_ - 1.0);
            const double b = geom_[t].area * (p_ - 2.0) * std::pow(s2, 0.5 * p_ - 2.0);
            std::array<double, 3> proj{};
            for (int i = 0; i < 3; ++i) proj[i] = ge[0] * gd[i][0] + ge[1] * gd[i][1];
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    const double kij = a * (gd[i][0] * gd[j][0] + gd[i][1] * gd[j][1]) + b * proj[i] * proj[j];
                    trips.emplace_back(dofs_->node_to_dof[tri.v[i]], dofs_->node_to_dof[tri.v[j]], kij);
                }
            }
        }
        const auto& rule = quad::unit_gauss<4>();
        for (std::size_t e : exterior_) {
            const auto& edge = mesh_->boundary_edges()[e];
            const int da = dofs_->node_to_dof[edge.v[0]];
            const int db = dofs_->node_to_dof[edge.v[1]];
            const double wa = x[da], wb = x[db];
            const double len = mesh_->edge_length(e);
            double maa = 0.0, mab = 0.0, mbb = 0.0;
            for (int q = 0; q < 4; ++q) {
                const double s = rule.nodes[q];
                const double w = wa + (wb - wa) * s;
                const double c = beta_ * (p_ - 1.0) * len * rule.weights[q] *
                                 std::pow(eps * eps + w * w, 0.5 * (p_ - 2.0));
                maa += c * (1.0 - s) * (1.0 - s);
                mab += c * (1.0 - s) * s;
                mbb += c * s * s;
            }
            trips.emplace_back(da, da, maa);
            trips.emplace_back(da, db, mab);
            trips.emplace_back(db, da, mab);
            trips.emplace_back(db, db, mbb);
        }
        Matrix h(size(), size());
        h.setFromTriplets(trips.begin(), trips.end());
        return h;
    }

private:
    std::shared_ptr<const Mesh> mesh_;
    std::shared_ptr<const DofMap> dofs_;
    std::vector<ElementGeometry> geom_;
    std::vector<std::size_t> exterior_;
    LoadData load_;
    Vector dof_load_;
    double p_;
    double beta_;
};

/// Energy F_eps of `field` for the given parameters; eps = 0 gives the
/// unregularised functional.
inline double energy_value(const Field& field, const SolveParams& params, const SourceSpec& f, double epsilon) {
    if (!(epsilon >= 0.0)) throw ParameterError("epsilon must be non-negative");
    f.validate(field.mesh());
    const PLaplaceEnergy energy(field.mesh_ptr(), field.dofs_ptr(), params.p, params.beta, f);
    const auto vals = field.dof_values();
    const Eigen::Map<const Eigen::VectorXd> x(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return energy.value(x, epsilon);
}

} // namespace talenti
