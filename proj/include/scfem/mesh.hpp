#pragma once

// Conforming triangulations of the unit square with newest-vertex
// bisection. Each triangle stores its refinement edge implicitly as
// (v0,v1), with v2 the newest vertex; bisection emits children whose
// refinement edges are the other two original edges, which keeps the
// generated shapes in finitely many similarity classes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scfem {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Triangle {
    std::array<int, 3> v{};  // refinement edge (v[0], v[1]); v[2] newest vertex
    int label = 0;
};

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    int tag = 1;  // 1 = homogeneous Dirichlet
};

class Triangulation {
public:
    Triangulation() = default;
    Triangulation(std::vector<Vec2> vertices, std::vector<Triangle> triangles,
                  std::vector<BoundaryEdge> boundary)
        : vertices_(std::move(vertices)),
          triangles_(std::move(triangles)),
          boundary_(std::move(boundary)) {
        for (const auto& t : triangles_)
            for (int k = 0; k < 3; ++k)
                if (t.v[static_cast<std::size_t>(k)] < 0 ||
                    t.v[static_cast<std::size_t>(k)] >= vertex_count())
                    throw std::invalid_argument("Triangulation: vertex id out of range");
        for (const auto& e : boundary_)
            if (e.a < 0 || e.a >= vertex_count() || e.b < 0 || e.b >= vertex_count())
                throw std::invalid_argument("Triangulation: boundary vertex out of range");
    }

    int vertex_count() const { return static_cast<int>(vertices_.size()); }
    int triangle_count() const { return static_cast<int>(triangles_.size()); }
    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
    const Vec2& vertex(int id) const { return vertices_[static_cast<std::size_t>(id)]; }
    const Triangle& triangle(int t) const { return triangles_[static_cast<std::size_t>(t)]; }

    double signed_area(int t) const {
        const auto& tr = triangles_[static_cast<std::size_t>(t)];
        const Vec2& p0 = vertex(tr.v[0]);
        const Vec2& p1 = vertex(tr.v[1]);
        const Vec2& p2 = vertex(tr.v[2]);
        return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
    }

    double total_area() const {
        double s = 0.0;
        for (int t = 0; t < triangle_count(); ++t) s += signed_area(t);
        return s;
    }

    /// Vertices touched by at least one boundary edge.
    std::vector<bool> boundary_vertex_mask() const {
        std::vector<bool> mask(static_cast<std::size_t>(vertex_count()), false);
        for (const auto& e : boundary_) {
            mask[static_cast<std::size_t>(e.a)] = true;
            mask[static_cast<std::size_t>(e.b)] = true;
        }
        return mask;
    }

private:
    std::vector<Vec2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<BoundaryEdge> boundary_;
};

inline double edge_length(const Triangulation& m, int a, int b) {
    const Vec2& pa = m.vertex(a);
    const Vec2& pb = m.vertex(b);
    return std::hypot(pb.x - pa.x, pb.y - pa.y);
}

inline double element_diameter(const Triangulation& m, int t) {
    const auto& tr = m.triangle(t);
    double d01 = edge_length(m, tr.v[0], tr.v[1]);
    double d12 = edge_length(m, tr.v[1], tr.v[2]);
    double d20 = edge_length(m, tr.v[2], tr.v[0]);
    return std::max(d01, std::max(d12, d20));
}

inline double min_angle(const Triangulation& m) {
    double best = 4.0;  // > pi
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangle(t);
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = m.vertex(tr.v[static_cast<std::size_t>(k)]);
            const Vec2& b = m.vertex(tr.v[static_cast<std::size_t>((k + 1) % 3)]);
            const Vec2& c = m.vertex(tr.v[static_cast<std::size_t>((k + 2) % 3)]);
            double ux = b.x - a.x, uy = b.y - a.y;
            double vx = c.x - a.x, vy = c.y - a.y;
            double dot = ux * vx + uy * vy;
            double cross = std::abs(ux * vy - uy * vx);
            double ang = std::atan2(cross, dot);
            if (ang < best) best = ang;
        }
    }
    return best;
}

/// Every interior edge shared by exactly two triangles, every boundary
/// edge by exactly one and listed in the boundary table.
inline bool is_conforming(const Triangulation& m) {
    auto key = [](int a, int b) {
        return (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
               static_cast<std::uint64_t>(std::max(a, b));
    };
    std::map<std::uint64_t, int> incidence;
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangle(t);
        for (int k = 0; k < 3; ++k)
            ++incidence[key(tr.v[static_cast<std::size_t>(k)],
                            tr.v[static_cast<std::size_t>((k + 1) % 3)])];
    }
    std::set<std::uint64_t> listed;
    for (const auto& e : m.boundary_edges()) listed.insert(key(e.a, e.b));
    for (const auto& [k, count] : incidence) {
        if (count == 2) {
            if (listed.count(k)) return false;
        } else if (count == 1) {
            if (!listed.count(k)) return false;
        } else {
            return false;
        }
    }
    for (auto k : listed)
        if (incidence.find(k) == incidence.end() || incidence[k] != 1) return false;
    return true;
}

/// Structured mesh of the unit square: divisions x divisions cells, each
/// split along the diagonal from its lower-left to upper-right corner.
/// Refinement edges are the diagonals, the longest edge of each triangle.
/// Labels come from the centroid classifier (default all zero).
inline Triangulation unit_square_mesh(
    int divisions, const std::function<int(double, double)>& label_at = {}) {
    if (divisions < 1) throw std::invalid_argument("unit_square_mesh: divisions must be >= 1");
    const int d = divisions;
    auto vid = [d](int i, int j) { return j * (d + 1) + i; };
    std::vector<Vec2> vertices(static_cast<std::size_t>((d + 1) * (d + 1)));
    for (int j = 0; j <= d; ++j)
        for (int i = 0; i <= d; ++i)
            vertices[static_cast<std::size_t>(vid(i, j))] =
                Vec2{static_cast<double>(i) / d, static_cast<double>(j) / d};
    std::vector<Triangle> tris;
    tris.reserve(static_cast<std::size_t>(2 * d * d));
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) {
            int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), e = vid(i, j + 1);
            // Diagonal a-c is the refinement edge of both halves.
            Triangle lower{{c, a, b}, 0};
            Triangle upper{{a, c, e}, 0};
            if (label_at) {
                auto centroid_label = [&](const Triangle& t) {
                    double cx = (vertices[static_cast<std::size_t>(t.v[0])].x +
                                 vertices[static_cast<std::size_t>(t.v[1])].x +
                                 vertices[static_cast<std::size_t>(t.v[2])].x) /
                                3.0;
                    double cy = (vertices[static_cast<std::size_t>(t.v[0])].y +
                                 vertices[static_cast<std::size_t>(t.v[1])].y +
                                 vertices[static_cast<std::size_t>(t.v[2])].y) /
                                3.0;
                    return label_at(cx, cy);
                };
                lower.label = centroid_label(lower);
                upper.label = centroid_label(upper);
            }
            tris.push_back(lower);
            tris.push_back(upper);
        }
    std::vector<BoundaryEdge> boundary;
    boundary.reserve(static_cast<std::size_t>(4 * d));
    for (int i = 0; i < d; ++i) boundary.push_back({vid(i, 0), vid(i + 1, 0), 1});
    for (int j = 0; j < d; ++j) boundary.push_back({vid(d, j), vid(d, j + 1), 1});
    for (int i = 0; i < d; ++i) boundary.push_back({vid(i + 1, d), vid(i, d), 1});
    for (int j = 0; j < d; ++j) boundary.push_back({vid(0, j + 1), vid(0, j), 1});
    return Triangulation(std::move(vertices), std::move(tris), std::move(boundary));
}

struct RefinementResult {
    Triangulation mesh;
    std::vector<int> parent;  // parent[t'] = triangle of the input mesh
};

/// Newest-vertex bisection of the marked triangles plus conforming
/// closure. Children of (v0,v1,v2) split at w = mid(v0,v1) are
/// (v2,v0,w) and (v1,v2,w); at most two further bisections per input
/// triangle are needed when its other edges are marked by closure.
inline RefinementResult refine_nvb(const Triangulation& m, std::span<const int> marked) {
    if (m.triangle_count() == 0) throw std::invalid_argument("refine_nvb: empty mesh");
    for (int t : marked)
        if (t < 0 || t >= m.triangle_count())
            throw std::invalid_argument("refine_nvb: marked id out of range");

    auto key = [](int a, int b) {
        return (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
               static_cast<std::uint64_t>(std::max(a, b));
    };

    std::set<std::uint64_t> split;
    for (int t : marked) {
        const auto& tr = m.triangle(t);
        split.insert(key(tr.v[0], tr.v[1]));
    }
    // Closure: a triangle with any marked edge must split its refinement
    // edge too; iterate to a fixed point.
    bool changed = !split.empty();
    while (changed) {
        changed = false;
        for (int t = 0; t < m.triangle_count(); ++t) {
            const auto& tr = m.triangle(t);
            std::uint64_t ref = key(tr.v[0], tr.v[1]);
            if (split.count(ref)) continue;
            if (split.count(key(tr.v[1], tr.v[2])) || split.count(key(tr.v[2], tr.v[0]))) {
                split.insert(ref);
                changed = true;
            }
        }
    }

    std::vector<Vec2> vertices = m.vertices();
    std::map<std::uint64_t, int> midpoint;
    for (std::uint64_t k : split) {  // std::set iterates in sorted order
        int a = static_cast<int>(k >> 32);
        int b = static_cast<int>(k & 0xffffffffu);
        midpoint[k] = static_cast<int>(vertices.size());
        vertices.push_back(Vec2{0.5 * (m.vertex(a).x + m.vertex(b).x),
                                0.5 * (m.vertex(a).y + m.vertex(b).y)});
    }

    std::vector<Triangle> tris;
    std::vector<int> parent;
    auto emit = [&](std::array<int, 3> v, int label, int from) {
        tris.push_back(Triangle{v, label});
        parent.push_back(from);
    };
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangle(t);
        int v0 = tr.v[0], v1 = tr.v[1], v2 = tr.v[2];
        auto it01 = midpoint.find(key(v0, v1));
        if (it01 == midpoint.end()) {
            emit(tr.v, tr.label, t);
            continue;
        }
        int w01 = it01->second;
        auto it20 = midpoint.find(key(v2, v0));
        if (it20 == midpoint.end()) {
            emit({v2, v0, w01}, tr.label, t);
        } else {
            emit({w01, v2, it20->second}, tr.label, t);
            emit({v0, w01, it20->second}, tr.label, t);
        }
        auto it12 = midpoint.find(key(v1, v2));
        if (it12 == midpoint.end()) {
            emit({v1, v2, w01}, tr.label, t);
        } else {
            emit({w01, v1, it12->second}, tr.label, t);
            emit({v2, w01, it12->second}, tr.label, t);
        }
    }

    std::vector<BoundaryEdge> boundary;
    for (const auto& e : m.boundary_edges()) {
        auto it = midpoint.find(key(e.a, e.b));
        if (it == midpoint.end()) {
            boundary.push_back(e);
        } else {
            boundary.push_back({e.a, it->second, e.tag});
            boundary.push_back({it->second, e.b, e.tag});
        }
    }

    return RefinementResult{Triangulation(std::move(vertices), std::move(tris), std::move(boundary)),
                            std::move(parent)};
}

/// `generations` rounds of bisecting every triangle.
inline Triangulation uniform_refine(const Triangulation& m, int generations) {
    Triangulation cur = m;
    for (int g = 0; g < generations; ++g) {
        std::vector<int> all(static_cast<std::size_t>(cur.triangle_count()));
        for (int t = 0; t < cur.triangle_count(); ++t) all[static_cast<std::size_t>(t)] = t;
        cur = refine_nvb(cur, all).mesh;
    }
    return cur;
}

/// Plain-text snapshot: header line with counts, then one vertex per
/// line (x y), then one triangle per line (v0 v1 v2 label).
inline void write_mesh_snapshot(std::ostream& os, const Triangulation& m) {
    char buf[80];
    os << "vertices " << m.vertex_count() << " triangles " << m.triangle_count() << "\n";
    for (const auto& v : m.vertices()) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", v.x, v.y);
        os << buf;
    }
    for (const auto& t : m.triangles())
        os << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.label << "\n";
}

}  // namespace scfem
