#pragma once

// Piecewise-linear FEM for -div(a grad u) = f on the unit square with
// homogeneous Dirichlet data. The diffusion coefficient is affine in the
// parameter and constant per subdomain label, so element integrals are
// exact; analytic forcing falls back to a degree-4 quadrature.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mesh.hpp"

namespace scfem {

/// Scalar field on the domain: either one constant per subdomain label
/// or an analytic function of (x, y).
class SpatialField {
public:
    static SpatialField constant(double v) { return per_label(std::vector<double>{v}); }
    static SpatialField per_label(std::vector<double> by_label) {
        SpatialField f;
        f.data_ = std::move(by_label);
        return f;
    }
    static SpatialField analytic(std::function<double(double, double)> fn) {
        if (!fn) throw std::invalid_argument("SpatialField: null function");
        SpatialField f;
        f.data_ = std::move(fn);
        return f;
    }

    bool is_per_label() const { return std::holds_alternative<std::vector<double>>(data_); }

    double label_value(int label) const {
        const auto& v = std::get<std::vector<double>>(data_);
        if (label >= 0 && label < static_cast<int>(v.size()))
            return v[static_cast<std::size_t>(label)];
        if (v.size() == 1) return v[0];  // constant field, any label
        throw std::invalid_argument("SpatialField: no value for label " + std::to_string(label));
    }

    double analytic_value(double x, double y) const {
        return std::get<std::function<double(double, double)>>(data_)(x, y);
    }

private:
    SpatialField() = default;
    std::variant<std::vector<double>, std::function<double(double, double)>> data_;
};

/// Diffusion coefficient a(y, x) = base(x) + sum_n y_n * scale_n * term_n(x),
/// with every field constant per subdomain label and y in the reference
/// box [-1,1]^N. Construction enumerates the sign corners of the box and
/// rejects coefficients that are not uniformly positive.
class DiffusionCoefficient {
public:
    DiffusionCoefficient(std::vector<double> base_by_label,
                         std::vector<std::vector<double>> term_by_label,
                         std::vector<double> param_scale)
        : base_(std::move(base_by_label)),
          terms_(std::move(term_by_label)),
          scale_(std::move(param_scale)) {
        if (base_.empty()) throw std::invalid_argument("DiffusionCoefficient: no labels");
        if (terms_.empty())
            throw std::invalid_argument("DiffusionCoefficient: needs at least one term");
        if (scale_.size() != terms_.size())
            throw std::invalid_argument("DiffusionCoefficient: one scale per term required");
        for (const auto& t : terms_)
            if (t.size() != base_.size())
                throw std::invalid_argument("DiffusionCoefficient: term label count mismatch");
        if (dim() > 16)
            throw std::invalid_argument("DiffusionCoefficient: too many parameter directions");
        check_corners();
    }

    int dim() const { return static_cast<int>(terms_.size()); }
    int label_count() const { return static_cast<int>(base_.size()); }
    double min_value() const { return min_value_; }
    double max_value() const { return max_value_; }

    double value(std::span<const double> y, int label) const {
        if (static_cast<int>(y.size()) != dim())
            throw std::invalid_argument("DiffusionCoefficient: parameter dimension mismatch");
        if (label < 0 || label >= label_count())
            throw std::invalid_argument("DiffusionCoefficient: unknown label " +
                                        std::to_string(label));
        double v = base_[static_cast<std::size_t>(label)];
        for (int n = 0; n < dim(); ++n)
            v += y[static_cast<std::size_t>(n)] * scale_[static_cast<std::size_t>(n)] *
                 terms_[static_cast<std::size_t>(n)][static_cast<std::size_t>(label)];
        return v;
    }

private:
    void check_corners() {
        min_value_ = base_[0];
        max_value_ = base_[0];
        bool first = true;
        for (int label = 0; label < label_count(); ++label) {
            for (int mask = 0; mask < (1 << dim()); ++mask) {
                double v = base_[static_cast<std::size_t>(label)];
                for (int n = 0; n < dim(); ++n) {
                    double s = (mask & (1 << n)) ? 1.0 : -1.0;
                    v += s * scale_[static_cast<std::size_t>(n)] *
                         terms_[static_cast<std::size_t>(n)][static_cast<std::size_t>(label)];
                }
                if (first || v < min_value_) min_value_ = v;
                if (first || v > max_value_) max_value_ = v;
                first = false;
            }
        }
        if (!(min_value_ > 0.0))
            throw std::invalid_argument("DiffusionCoefficient: not uniformly elliptic, min " +
                                        std::to_string(min_value_));
    }

    std::vector<double> base_;
    std::vector<std::vector<double>> terms_;
    std::vector<double> scale_;
    double min_value_ = 0.0;
    double max_value_ = 0.0;
};

namespace detail {

// Degree-4 rule on the reference triangle: 6 points, weights sum to 1.
struct TriQuadrature {
    static constexpr int size = 6;
    double bary[size][3];
    double weight[size];
    TriQuadrature() {
        const double a1 = 0.445948490915965;
        const double w1 = 0.223381589678011;
        const double a2 = 0.091576213509771;
        const double w2 = 0.109951743655322;
        int q = 0;
        for (int k = 0; k < 3; ++k, ++q) {
            for (int j = 0; j < 3; ++j) bary[q][j] = a1;
            bary[q][k] = 1.0 - 2.0 * a1;
            weight[q] = w1;
        }
        for (int k = 0; k < 3; ++k, ++q) {
            for (int j = 0; j < 3; ++j) bary[q][j] = a2;
            bary[q][k] = 1.0 - 2.0 * a2;
            weight[q] = w2;
        }
    }
};

inline const TriQuadrature& tri_quadrature() {
    static const TriQuadrature q;
    return q;
}

struct ElementGeometry {
    double area;
    double gx[3];  // gradient of the barycentric basis
    double gy[3];
};

inline ElementGeometry element_geometry(const Triangulation& m, int t) {
    const auto& tr = m.triangle(t);
    const Vec2& p0 = m.vertex(tr.v[0]);
    const Vec2& p1 = m.vertex(tr.v[1]);
    const Vec2& p2 = m.vertex(tr.v[2]);
    double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    if (det <= 0.0) throw std::runtime_error("element_geometry: degenerate or flipped element");
    ElementGeometry g;
    g.area = 0.5 * det;
    g.gx[0] = (p1.y - p2.y) / det;
    g.gy[0] = (p2.x - p1.x) / det;
    g.gx[1] = (p2.y - p0.y) / det;
    g.gy[1] = (p0.x - p2.x) / det;
    g.gx[2] = (p0.y - p1.y) / det;
    g.gy[2] = (p1.x - p0.x) / det;
    return g;
}

}  // namespace detail

struct FESolution {
    std::vector<double> nodal;       // all vertices; boundary entries exactly 0
    std::vector<double> parameter;   // collocation parameter the solve used
    int free_dofs = 0;
};

/// Stiffness matrix on the free (interior) vertices, plus the index map.
struct AssembledSystem {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
    std::vector<int> free_index;  // vertex id -> free index, -1 on boundary
    std::vector<int> free_vertex;
};

inline AssembledSystem assemble_system(const Triangulation& m, const DiffusionCoefficient& a,
                                       std::span<const double> y, const SpatialField& f) {
    auto mask = m.boundary_vertex_mask();
    AssembledSystem sys;
    sys.free_index.assign(static_cast<std::size_t>(m.vertex_count()), -1);
    for (int v = 0; v < m.vertex_count(); ++v)
        if (!mask[static_cast<std::size_t>(v)]) {
            sys.free_index[static_cast<std::size_t>(v)] = static_cast<int>(sys.free_vertex.size());
            sys.free_vertex.push_back(v);
        }
    const int ndof = static_cast<int>(sys.free_vertex.size());
    if (ndof == 0) throw std::runtime_error("assemble_system: no interior vertices");

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(9 * m.triangle_count()));
    sys.rhs = Eigen::VectorXd::Zero(ndof);
    const auto& quad = detail::tri_quadrature();

    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangle(t);
        auto geo = detail::element_geometry(m, t);
        double coeff = a.value(y, tr.label);
        for (int r = 0; r < 3; ++r) {
            int fr = sys.free_index[static_cast<std::size_t>(tr.v[static_cast<std::size_t>(r)])];
            if (fr < 0) continue;
            for (int c = 0; c < 3; ++c) {
                int fc = sys.free_index[static_cast<std::size_t>(tr.v[static_cast<std::size_t>(c)])];
                if (fc < 0) continue;
                double k = coeff * geo.area *
                           (geo.gx[r] * geo.gx[c] + geo.gy[r] * geo.gy[c]);
                triplets.emplace_back(fr, fc, k);
            }
        }
        if (f.is_per_label()) {
            double load = f.label_value(tr.label) * geo.area / 3.0;  // exact for constant f
            for (int r = 0; r < 3; ++r) {
                int fr = sys.free_index[static_cast<std::size_t>(tr.v[static_cast<std::size_t>(r)])];
                if (fr >= 0) sys.rhs[fr] += load;
            }
        } else {
            const Vec2& p0 = m.vertex(tr.v[0]);
            const Vec2& p1 = m.vertex(tr.v[1]);
            const Vec2& p2 = m.vertex(tr.v[2]);
            for (int q = 0; q < detail::TriQuadrature::size; ++q) {
                double l0 = quad.bary[q][0], l1 = quad.bary[q][1], l2 = quad.bary[q][2];
                double x = l0 * p0.x + l1 * p1.x + l2 * p2.x;
                double yy = l0 * p0.y + l1 * p1.y + l2 * p2.y;
                double fv = f.analytic_value(x, yy) * quad.weight[q] * geo.area;
                double l[3] = {l0, l1, l2};
                for (int r = 0; r < 3; ++r) {
                    int fr = sys.free_index[static_cast<std::size_t>(tr.v[static_cast<std::size_t>(r)])];
                    if (fr >= 0) sys.rhs[fr] += fv * l[r];
                }
            }
        }
    }
    sys.matrix.resize(ndof, ndof);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

/// Sparse direct solve with a residual check; throws when the system is
/// singular or the relative residual exceeds 1e-10.
inline FESolution assemble_and_solve(const Triangulation& m, const DiffusionCoefficient& a,
                                     std::span<const double> y, const SpatialField& f) {
    AssembledSystem sys = assemble_system(m, a, y, f);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(sys.matrix);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("assemble_and_solve: factorization failed");
    Eigen::VectorXd u = solver.solve(sys.rhs);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("assemble_and_solve: solve failed");
    double bnorm = sys.rhs.norm();
    if (bnorm > 0.0) {
        double rel = (sys.matrix * u - sys.rhs).norm() / bnorm;
        if (!(rel <= 1e-10))
            throw std::runtime_error("assemble_and_solve: residual too large, " +
                                     std::to_string(rel));
    }
    FESolution sol;
    sol.parameter.assign(y.begin(), y.end());
    sol.nodal.assign(static_cast<std::size_t>(m.vertex_count()), 0.0);
    for (int k = 0; k < static_cast<int>(sys.free_vertex.size()); ++k)
        sol.nodal[static_cast<std::size_t>(sys.free_vertex[static_cast<std::size_t>(k)])] = u[k];
    sol.free_dofs = static_cast<int>(sys.free_vertex.size());
    return sol;
}

/// Constant gradient of the P1 solution on each element.
inline std::vector<Vec2> element_gradients(const Triangulation& m, const FESolution& sol) {
    if (sol.nodal.size() != static_cast<std::size_t>(m.vertex_count()))
        throw std::invalid_argument("element_gradients: solution size mismatch");
    std::vector<Vec2> g(static_cast<std::size_t>(m.triangle_count()));
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangle(t);
        auto geo = detail::element_geometry(m, t);
        Vec2 gr{0.0, 0.0};
        for (int k = 0; k < 3; ++k) {
            double uv = sol.nodal[static_cast<std::size_t>(tr.v[static_cast<std::size_t>(k)])];
            gr.x += uv * geo.gx[k];
            gr.y += uv * geo.gy[k];
        }
        g[static_cast<std::size_t>(t)] = gr;
    }
    return g;
}

struct ResidualEstimate {
    std::vector<double> element_sq;  // squared indicator per element
    double total = 0.0;              // sqrt of the sum
};

/// Residual estimator: per element, diameter^2 * ||f||_T^2 plus, for each
/// interior edge, edge_length * || half jump of a grad U . n ||_edge^2.
/// The divergence term drops because U is piecewise linear and a is
/// constant per element.
inline ResidualEstimate residual_estimator(const Triangulation& m, const FESolution& sol,
                                           const DiffusionCoefficient& a,
                                           const SpatialField& f) {
    std::vector<double> eta(static_cast<std::size_t>(m.triangle_count()), 0.0);
    const auto& quad = detail::tri_quadrature();
    auto grads = element_gradients(m, sol);

    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangle(t);
        auto geo = detail::element_geometry(m, t);
        double h = element_diameter(m, t);
        double fsq;
        if (f.is_per_label()) {
            double fv = f.label_value(tr.label);
            fsq = fv * fv * geo.area;
        } else {
            const Vec2& p0 = m.vertex(tr.v[0]);
            const Vec2& p1 = m.vertex(tr.v[1]);
            const Vec2& p2 = m.vertex(tr.v[2]);
            fsq = 0.0;
            for (int q = 0; q < detail::TriQuadrature::size; ++q) {
                double x = quad.bary[q][0] * p0.x + quad.bary[q][1] * p1.x + quad.bary[q][2] * p2.x;
                double yy = quad.bary[q][0] * p0.y + quad.bary[q][1] * p1.y + quad.bary[q][2] * p2.y;
                double fv = f.analytic_value(x, yy);
                fsq += fv * fv * quad.weight[q];
            }
            fsq *= geo.area;
        }
        eta[static_cast<std::size_t>(t)] = h * h * fsq;
    }

    auto key = [](int a_, int b_) {
        return (static_cast<std::uint64_t>(std::min(a_, b_)) << 32) |
               static_cast<std::uint64_t>(std::max(a_, b_));
    };
    std::map<std::uint64_t, std::pair<int, int>> edge_tris;
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangle(t);
        for (int k = 0; k < 3; ++k) {
            auto e = key(tr.v[static_cast<std::size_t>(k)], tr.v[static_cast<std::size_t>((k + 1) % 3)]);
            auto [it, inserted] = edge_tris.try_emplace(e, std::pair<int, int>{t, -1});
            if (!inserted) it->second.second = t;
        }
    }

    for (const auto& [e, pair] : edge_tris) {
        if (pair.second < 0) continue;  // boundary edge
        int va = static_cast<int>(e >> 32);
        int vb = static_cast<int>(e & 0xffffffffu);
        double he = edge_length(m, va, vb);
        const Vec2& pa = m.vertex(va);
        const Vec2& pb = m.vertex(vb);
        double nx = (pb.y - pa.y) / he;
        double ny = -(pb.x - pa.x) / he;
        double a1 = a.value(sol.parameter, m.triangle(pair.first).label);
        double a2 = a.value(sol.parameter, m.triangle(pair.second).label);
        const Vec2& g1 = grads[static_cast<std::size_t>(pair.first)];
        const Vec2& g2 = grads[static_cast<std::size_t>(pair.second)];
        double jump = a1 * (g1.x * nx + g1.y * ny) - a2 * (g2.x * nx + g2.y * ny);
        // he * integral over the edge of (jump/2)^2 = he^2 * jump^2 / 4
        double contrib = he * he * jump * jump * 0.25;
        eta[static_cast<std::size_t>(pair.first)] += contrib;
        eta[static_cast<std::size_t>(pair.second)] += contrib;
    }

    ResidualEstimate out;
    out.element_sq = std::move(eta);
    double s = 0.0;
    for (double v : out.element_sq) s += v;
    out.total = std::sqrt(s);
    return out;
}

/// Uniform-bin point locator; candidate scan is in ascending triangle id,
/// so points on shared edges resolve to the lower id.
class PointLocator {
public:
    explicit PointLocator(const Triangulation& m) : mesh_(&m) {
        double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
        if (m.vertex_count() > 0) {
            xmin = xmax = m.vertex(0).x;
            ymin = ymax = m.vertex(0).y;
            for (const auto& v : m.vertices()) {
                xmin = std::min(xmin, v.x);
                xmax = std::max(xmax, v.x);
                ymin = std::min(ymin, v.y);
                ymax = std::max(ymax, v.y);
            }
        }
        x0_ = xmin;
        y0_ = ymin;
        nb_ = std::max(1, std::min(512, static_cast<int>(std::sqrt(
                                             static_cast<double>(m.triangle_count())))));
        dx_ = (xmax - xmin) / nb_;
        dy_ = (ymax - ymin) / nb_;
        if (dx_ <= 0.0) dx_ = 1.0;
        if (dy_ <= 0.0) dy_ = 1.0;
        bins_.resize(static_cast<std::size_t>(nb_ * nb_));
        for (int t = 0; t < m.triangle_count(); ++t) {
            const auto& tr = m.triangle(t);
            double bx0 = m.vertex(tr.v[0]).x, bx1 = bx0, by0 = m.vertex(tr.v[0]).y, by1 = by0;
            for (int k = 1; k < 3; ++k) {
                const Vec2& p = m.vertex(tr.v[static_cast<std::size_t>(k)]);
                bx0 = std::min(bx0, p.x);
                bx1 = std::max(bx1, p.x);
                by0 = std::min(by0, p.y);
                by1 = std::max(by1, p.y);
            }
            for (int bj = clampi(by0); bj <= clampi_y(by1); ++bj)
                for (int bi = clampi_x(bx0); bi <= clampi_x(bx1); ++bi)
                    bins_[static_cast<std::size_t>(bj * nb_ + bi)].push_back(t);
        }
    }

    /// Triangle containing the point (lowest id on ties). Throws if the
    /// point is outside the mesh.
    int locate(double x, double y) const {
        int bi = clampi_x(x);
        int bj = clampi_y(y);
        const auto& cand = bins_[static_cast<std::size_t>(bj * nb_ + bi)];
        for (double tol : {1e-12, 1e-8}) {
            for (int t : cand)
                if (contains(t, x, y, tol)) return t;
        }
        throw std::runtime_error("PointLocator: point outside mesh");
    }

private:
    int clampi(double v) const { return clampi_y(v); }
    int clampi_x(double x) const {
        int b = static_cast<int>((x - x0_) / dx_);
        return std::max(0, std::min(nb_ - 1, b));
    }
    int clampi_y(double y) const {
        int b = static_cast<int>((y - y0_) / dy_);
        return std::max(0, std::min(nb_ - 1, b));
    }
    bool contains(int t, double x, double y, double tol) const {
        const auto& tr = mesh_->triangle(t);
        const Vec2& p0 = mesh_->vertex(tr.v[0]);
        const Vec2& p1 = mesh_->vertex(tr.v[1]);
        const Vec2& p2 = mesh_->vertex(tr.v[2]);
        double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        double l1 = ((x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (y - p0.y)) / det;
        double l2 = ((p1.x - p0.x) * (y - p0.y) - (x - p0.x) * (p1.y - p0.y)) / det;
        double l0 = 1.0 - l1 - l2;
        return l0 >= -tol && l1 >= -tol && l2 >= -tol;
    }

    const Triangulation* mesh_;
    double x0_ = 0.0, y0_ = 0.0, dx_ = 1.0, dy_ = 1.0;
    int nb_ = 1;
    std::vector<std::vector<int>> bins_;
};

/// Solution gradient sampled at arbitrary interior points.
inline std::vector<Vec2> gradient_at_points(const Triangulation& m, const FESolution& sol,
                                            std::span<const Vec2> pts) {
    PointLocator loc(m);
    auto grads = element_gradients(m, sol);
    std::vector<Vec2> out(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k)
        out[k] = grads[static_cast<std::size_t>(loc.locate(pts[k].x, pts[k].y))];
    return out;
}

}  // namespace scfem
