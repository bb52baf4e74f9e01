#pragma once

// Benchmark problem definitions: an affine-coefficient inclusion problem
// on the unit square (four square inclusions around a central loaded
// square) and a parameter-free manufactured Poisson problem.

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "fem.hpp"
#include "mesh.hpp"

namespace scfem {

struct LabeledBox {
    int label = 0;
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
};

/// Axis-aligned subdomain layout; everything outside the boxes is label 0.
struct SubdomainGeometry {
    std::vector<LabeledBox> boxes;

    int label_at(double x, double y) const {
        for (const auto& b : boxes)
            if (x >= b.xmin && x <= b.xmax && y >= b.ymin && y <= b.ymax) return b.label;
        return 0;
    }

    int label_count() const {
        int m = 0;
        for (const auto& b : boxes) m = std::max(m, b.label);
        return m + 1;
    }

    /// True when every box edge lies on a grid line of the structured mesh.
    bool aligned_with(int divisions) const {
        auto on_grid = [divisions](double v) {
            double s = v * divisions;
            return s == std::floor(s);
        };
        for (const auto& b : boxes)
            if (!on_grid(b.xmin) || !on_grid(b.xmax) || !on_grid(b.ymin) || !on_grid(b.ymax))
                return false;
        return true;
    }
};

struct ProblemSpec {
    std::string name;
    int dim = 0;  // number of parameter directions
    SubdomainGeometry geometry;
    DiffusionCoefficient coefficient;
    SpatialField forcing;
    int mesh_divisions = 32;

    ProblemSpec(std::string name_, int dim_, SubdomainGeometry geometry_,
                DiffusionCoefficient coefficient_, SpatialField forcing_, int divisions)
        : name(std::move(name_)),
          dim(dim_),
          geometry(std::move(geometry_)),
          coefficient(std::move(coefficient_)),
          forcing(std::move(forcing_)),
          mesh_divisions(divisions) {
        if (dim != coefficient.dim())
            throw std::invalid_argument("ProblemSpec: coefficient dimension mismatch");
        if (!geometry.aligned_with(mesh_divisions))
            throw std::invalid_argument(
                "ProblemSpec: subdomain boundaries must lie on initial-mesh grid lines");
    }

    Triangulation initial_mesh() const {
        const SubdomainGeometry& g = geometry;
        return unit_square_mesh(mesh_divisions,
                                [&g](double x, double y) { return g.label_at(x, y); });
    }
};

namespace detail {

// Inclusions sit in the four corners, the load patch in the center; all
// edges on multiples of 1/8 so any divisions divisible by 8 aligns.
inline SubdomainGeometry inclusion_geometry(int inclusions) {
    SubdomainGeometry g;
    const LabeledBox all[] = {
        {1, 0.125, 0.375, 0.125, 0.375},
        {2, 0.625, 0.875, 0.125, 0.375},
        {3, 0.625, 0.875, 0.625, 0.875},
        {4, 0.125, 0.375, 0.625, 0.875},
    };
    for (int n = 0; n < inclusions; ++n) g.boxes.push_back(all[n]);
    g.boxes.push_back(LabeledBox{5, 0.375, 0.625, 0.375, 0.625});
    return g;
}

}  // namespace detail

/// Inclusion problem truncated to the first `inclusions` parameter
/// directions. Coefficient 1.1 + gamma_n * y_n on inclusion n with
/// gamma = (0.9, 0.6, 0.3, 0.1); parameters are mapped from the
/// reference box by the factor 0.99. Load 100 on the center patch.
inline ProblemSpec inclusion_problem(int inclusions, int divisions = 32) {
    if (inclusions < 1 || inclusions > 4)
        throw std::invalid_argument("inclusion_problem: 1 to 4 inclusions supported");
    const double gamma[] = {0.9, 0.6, 0.3, 0.1};
    const int labels = 6;  // fixed layout keeps label meanings stable across truncations
    std::vector<double> base(labels, 1.1);
    std::vector<std::vector<double>> terms;
    std::vector<double> scale;
    for (int n = 0; n < inclusions; ++n) {
        std::vector<double> t(labels, 0.0);
        t[static_cast<std::size_t>(n + 1)] = gamma[n];
        terms.push_back(std::move(t));
        scale.push_back(0.99);
    }
    std::vector<double> f(labels, 0.0);
    f[5] = 100.0;
    return ProblemSpec("inclusion" + std::to_string(inclusions) + "d", inclusions,
                       detail::inclusion_geometry(inclusions),
                       DiffusionCoefficient(std::move(base), std::move(terms), std::move(scale)),
                       SpatialField::per_label(std::move(f)), divisions);
}

/// Parameter-free Poisson problem with the exact solution
/// sin(pi x) sin(pi y); carried as a one-direction problem whose single
/// coefficient term is identically zero, so the parametric estimator
/// vanishes and only the FE machinery is exercised.
inline ProblemSpec manufactured_poisson(int divisions = 32) {
    std::vector<double> base = {1.0};
    std::vector<std::vector<double>> terms = {{0.0}};
    std::vector<double> scale = {0.99};
    auto f = [](double x, double y) {
        const double p = std::numbers::pi;
        return 2.0 * p * p * std::sin(p * x) * std::sin(p * y);
    };
    return ProblemSpec("manufactured", 1, SubdomainGeometry{},
                       DiffusionCoefficient(std::move(base), std::move(terms), std::move(scale)),
                       SpatialField::analytic(f), divisions);
}

inline double manufactured_exact(double x, double y) {
    const double p = std::numbers::pi;
    return std::sin(p * x) * std::sin(p * y);
}

inline Vec2 manufactured_exact_gradient(double x, double y) {
    const double p = std::numbers::pi;
    return Vec2{p * std::cos(p * x) * std::sin(p * y), p * std::sin(p * x) * std::cos(p * y)};
}

inline ProblemSpec problem_preset(const std::string& name) {
    if (name == "inclusion4d") return inclusion_problem(4);
    if (name == "inclusion2d") return inclusion_problem(2);
    if (name == "inclusion1d") return inclusion_problem(1);
    if (name == "manufactured") return manufactured_poisson();
    throw std::invalid_argument("problem_preset: unknown preset '" + name + "'");
}

}  // namespace scfem
