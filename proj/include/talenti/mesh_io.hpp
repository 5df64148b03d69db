#pragma once

// MESH v1 text format:
//
//   MESH v1
//   vertices <nv>
//   <x> <y>                      (nv lines, implicit 0-based indices)
//   triangles <nt>
//   <i> <j> <k> <region>         (nt lines)
//   boundary_edges <ne>
//   <i> <j> <tag>                (ne lines)
//
// '#' starts a comment running to the end of the line; blank lines are skipped.

#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "talenti/error.hpp"
#include "talenti/geometry.hpp"

namespace talenti {

namespace detail {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    /// Next non-empty, comment-stripped line; false at end of input.
    bool next(std::string& out) {
        std::string raw;
        while (std::getline(in_, raw)) {
            ++line_;
            if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
            const auto first = raw.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto last = raw.find_last_not_of(" \t\r");
            out = raw.substr(first, last - first + 1);
            return true;
        }
        return false;
    }

    std::string require(const char* what) {
        std::string s;
        if (!next(s)) throw FormatError(std::string("unexpected end of file, expected ") + what, line_ + 1);
        return s;
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

// Parses exactly N whitespace-separated values from a line.
template <class... T>
void parse_fields(const std::string& s, std::size_t line, const char* what, T&... out) {
    std::istringstream is(s);
    is >> std::noskipws;
    auto read_one = [&](auto& v) {
        is >> std::ws >> v;
        if (is.fail()) throw FormatError(std::string("malformed ") + what + ": '" + s + "'", line);
    };
    (read_one(out), ...);
    is >> std::ws;
    if (!is.eof()) throw FormatError(std::string("trailing data in ") + what + ": '" + s + "'", line);
}

inline std::size_t parse_count(LineReader& r, const std::string& keyword) {
    const std::string s = r.require(keyword.c_str());
    std::istringstream is(s);
    std::string kw;
    long long n = -1;
    is >> kw >> n;
    std::string rest;
    if (kw != keyword || is.fail() || n < 0 || (is >> rest))
        throw FormatError("expected '" + keyword + " <count>', got '" + s + "'", r.line());
    return static_cast<std::size_t>(n);
}

inline void check_index(long long v, std::size_t nv, std::size_t line) {
    if (v < 0 || static_cast<std::size_t>(v) >= nv)
        throw FormatError("vertex index " + std::to_string(v) + " out of range [0, " +
                              std::to_string(nv) + ")",
                          line);
}

} // namespace detail

inline Mesh read_mesh(std::istream& in) {
    detail::LineReader reader(in);
    const std::string header = reader.require("header");
    if (header != "MESH v1") throw FormatError("expected header 'MESH v1', got '" + header + "'", reader.line());

    const std::size_t nv = detail::parse_count(reader, "vertices");
    std::vector<Point2> verts(nv);
    for (auto& p : verts) {
        const std::string s = reader.require("vertex");
        detail::parse_fields(s, reader.line(), "vertex", p.x, p.y);
    }

    const std::size_t nt = detail::parse_count(reader, "triangles");
    std::vector<Triangle> tris(nt);
    for (auto& t : tris) {
        const std::string s = reader.require("triangle");
        long long a = 0, b = 0, c = 0, region = 0;
        detail::parse_fields(s, reader.line(), "triangle", a, b, c, region);
        for (long long v : {a, b, c}) detail::check_index(v, nv, reader.line());
        if (region < 0) throw FormatError("negative region", reader.line());
        t = {{static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)}, static_cast<int>(region)};
    }

    const std::size_t ne = detail::parse_count(reader, "boundary_edges");
    std::vector<BoundaryEdge> edges(ne);
    for (auto& e : edges) {
        const std::string s = reader.require("boundary edge");
        long long a = 0, b = 0, tag = 0;
        detail::parse_fields(s, reader.line(), "boundary edge", a, b, tag);
        for (long long v : {a, b}) detail::check_index(v, nv, reader.line());
        if (tag < 0) throw FormatError("negative boundary tag", reader.line());
        e = {{static_cast<int>(a), static_cast<int>(b)}, static_cast<int>(tag)};
    }

    std::string extra;
    if (reader.next(extra)) throw FormatError("unexpected trailing content '" + extra + "'", reader.line());

    return Mesh(std::move(verts), std::move(tris), std::move(edges));
}

inline Mesh import_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file '" + path + "'");
    return read_mesh(in);
}

inline void write_mesh(const Mesh& mesh, std::ostream& out) {
    out << "MESH v1\n";
    out << std::setprecision(17);
    out << "vertices " << mesh.vertex_count() << '\n';
    for (const auto& p : mesh.vertices()) out << p.x << ' ' << p.y << '\n';
    out << "triangles " << mesh.triangle_count() << '\n';
    for (const auto& t : mesh.triangles())
        out << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.region << '\n';
    out << "boundary_edges " << mesh.boundary_edges().size() << '\n';
    for (const auto& e : mesh.boundary_edges()) out << e.v[0] << ' ' << e.v[1] << ' ' << e.tag << '\n';
}

inline void export_mesh(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mesh file '" + path + "'");
    write_mesh(mesh, out);
    if (!out) throw IoError("failed while writing '" + path + "'");
}

/// Builds the mesh described by a DomainSpec.
inline Mesh build_mesh(const DomainSpec& spec) {
    const auto [nr, na] = spec.resolution;
    switch (spec.kind) {
    case DomainKind::disk: return generate_disk_mesh(spec.R0, nr, na);
    case DomainKind::concentric_annulus: return generate_eccentric_annulus_mesh(spec.R0, spec.R1, 0.0, nr, na);
    case DomainKind::eccentric_annulus: return generate_eccentric_annulus_mesh(spec.R0, spec.R1, spec.d, nr, na);
    case DomainKind::external_mesh: return import_mesh(spec.mesh_path);
    }
    throw ParameterError("unknown domain kind");
}

} // namespace talenti
