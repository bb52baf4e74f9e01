#pragma once

// Independent reference implementations used only by the tests: naive
// Lagrange/tensor interpolation and surpluses (direct product formulas,
// no barycentric caching), a brute-force parametric indicator that
// interpolates the full collocation solution instead of the reduced
// backward-neighbor sum, random downward-closed sets, and quadrature
// error norms against known exact solutions.

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "scfem/estimators.hpp"
#include "scfem/fem.hpp"
#include "scfem/mesh.hpp"
#include "scfem/multiindex.hpp"
#include "scfem/sparse_grid.hpp"

namespace scfem::oracles {

// Midpoint value of the Poisson solution (a=1, f=1, unit square, zero
// boundary) from the Fourier double series, truncated far past the
// tolerance used in the tests.
inline constexpr double kPoissonMidpointFourier = 0.07367135327676616;

inline MultiIndexSet random_downward_closed(std::mt19937_64& rng, int dim, int max_size) {
    MultiIndexSet I = MultiIndexSet::initial(dim);
    while (I.size() < max_size) {
        Margin mg = margin(I);
        std::vector<MultiIndex> admissible;
        for (const auto& i : mg.indices) {
            bool ok = true;
            for (int n = 0; n < dim && ok; ++n)
                if (i[n] > 1 && !I.contains(i.shifted(n, -1))) ok = false;
            if (ok) admissible.push_back(i);
        }
        const auto& pick = admissible[rng() % admissible.size()];
        I = I.union_with(std::span<const MultiIndex>(&pick, 1));
    }
    return I;
}

inline double naive_lagrange_basis(const std::vector<double>& xs, int j, double z) {
    double p = 1.0;
    for (int k = 0; k < static_cast<int>(xs.size()); ++k)
        if (k != j)
            p *= (z - xs[static_cast<std::size_t>(k)]) /
                 (xs[static_cast<std::size_t>(j)] - xs[static_cast<std::size_t>(k)]);
    return p;
}

using PointSampler = std::function<double(const std::vector<double>&)>;

/// Full tensor interpolant at z of the sampler on the level-vector grid;
/// zero if any level is zero.
inline double naive_tensor_interp(const std::vector<int>& levels, const PointSampler& sample,
                                  std::span<const double> z) {
    const int N = static_cast<int>(levels.size());
    std::vector<const std::vector<double>*> nodes(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        if (levels[static_cast<std::size_t>(n)] <= 0) return 0.0;
        nodes[static_cast<std::size_t>(n)] =
            &cc_nodes(doubling_node_count(levels[static_cast<std::size_t>(n)]));
    }
    std::vector<int> digit(static_cast<std::size_t>(N), 0);
    std::vector<double> point(static_cast<std::size_t>(N));
    double acc = 0.0;
    for (;;) {
        double w = 1.0;
        for (int n = 0; n < N; ++n) {
            const auto& xs = *nodes[static_cast<std::size_t>(n)];
            int d = digit[static_cast<std::size_t>(n)];
            w *= naive_lagrange_basis(xs, d, z[static_cast<std::size_t>(n)]);
            point[static_cast<std::size_t>(n)] = xs[static_cast<std::size_t>(d)];
        }
        acc += w * sample(point);
        int n = N - 1;
        while (n >= 0 && digit[static_cast<std::size_t>(n)] + 1 ==
                             static_cast<int>(nodes[static_cast<std::size_t>(n)]->size())) {
            digit[static_cast<std::size_t>(n)] = 0;
            --n;
        }
        if (n < 0) break;
        ++digit[static_cast<std::size_t>(n)];
    }
    return acc;
}

/// Alternating-sign surplus through naive tensor interpolants.
inline double naive_surplus(const MultiIndex& i, const PointSampler& sample,
                            std::span<const double> z) {
    const int N = i.dim();
    double acc = 0.0;
    for (int mask = 0; mask < (1 << N); ++mask) {
        std::vector<int> levels(static_cast<std::size_t>(N));
        int bits = 0;
        for (int n = 0; n < N; ++n) {
            bool shifted = (mask & (1 << n)) != 0;
            if (shifted) ++bits;
            levels[static_cast<std::size_t>(n)] = i[n] - (shifted ? 1 : 0);
        }
        double sign = (bits % 2 == 0) ? 1.0 : -1.0;
        acc += sign * naive_tensor_interp(levels, sample, z);
    }
    return acc;
}

/// Combination-technique interpolant through naive tensor interpolants,
/// with coefficients recomputed from the inclusion-exclusion formula.
inline double naive_combination_interp(const MultiIndexSet& I, const PointSampler& sample,
                                       std::span<const double> z) {
    const int N = I.dim();
    double acc = 0.0;
    for (const auto& i : I.members()) {
        long long c = 0;
        for (int mask = 0; mask < (1 << N); ++mask) {
            std::vector<int> e = i.entries();
            int bits = 0;
            for (int n = 0; n < N; ++n)
                if (mask & (1 << n)) {
                    ++e[static_cast<std::size_t>(n)];
                    ++bits;
                }
            if (I.contains(MultiIndex(e))) c += (bits % 2 == 0) ? 1 : -1;
        }
        if (c == 0) continue;
        acc += static_cast<double>(c) * naive_tensor_interp(i.entries(), sample, z);
    }
    return acc;
}

/// Brute-force parametric indicator straight from its definition: the
/// surplus of the coefficient-weighted gradient of the *full*
/// interpolated solution, sup over theta of the RMS over the spatial
/// samples. `gradients` is laid out like in the production code: one
/// column per collocation point, x-components stacked on y-components.
inline double direct_parametric_indicator(const MultiIndex& i, const MultiIndexSet& I,
                                          const SparseGrid& grid,
                                          const Eigen::MatrixXd& gradients,
                                          const DiffusionCoefficient& a,
                                          std::span<const int> pi_labels,
                                          const ParamSampleSet& theta) {
    const int P = static_cast<int>(pi_labels.size());
    double sup = 0.0;
    for (const auto& z : theta.points) {
        double sumsq = 0.0;
        for (int r = 0; r < P; ++r) {
            for (int comp = 0; comp < 2; ++comp) {
                PointSampler weighted = [&](const std::vector<double>& zp) {
                    PointSampler field = [&](const std::vector<double>& q) {
                        int id = grid.point_id(q);
                        if (id < 0) throw std::logic_error("oracle: sample off the grid");
                        return gradients(comp * P + r, id);
                    };
                    double interp = naive_combination_interp(I, field, zp);
                    return a.value(zp, pi_labels[static_cast<std::size_t>(r)]) * interp;
                };
                double v = naive_surplus(i, weighted, z);
                sumsq += v * v;
            }
        }
        double norm = std::sqrt(sumsq / static_cast<double>(P));
        if (norm > sup) sup = norm;
    }
    return sup;
}

struct PolyInSpace {
    std::vector<std::vector<int>> exponents;
    std::vector<double> coefs;

    double eval(std::span<const double> z) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < coefs.size(); ++k) {
            double t = coefs[k];
            for (std::size_t n = 0; n < exponents[k].size(); ++n)
                t *= std::pow(z[n], exponents[k][n]);
            acc += t;
        }
        return acc;
    }
};

/// Random polynomial inside the space the sparse grid of I interpolates
/// exactly: one monomial per member with per-direction degree
/// node_count(level) - 1.
inline PolyInSpace random_poly_in_space(std::mt19937_64& rng, const MultiIndexSet& I) {
    PolyInSpace p;
    for (const auto& i : I.members()) {
        std::vector<int> e(static_cast<std::size_t>(I.dim()));
        for (int n = 0; n < I.dim(); ++n)
            e[static_cast<std::size_t>(n)] = doubling_node_count(i[n]) - 1;
        p.exponents.push_back(std::move(e));
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        p.coefs.push_back(2.0 * u - 1.0);
    }
    return p;
}

// Degree-5 rule on the reference triangle (7 points), independent of the
// production quadrature.
struct Quad7 {
    double bary[7][3];
    double weight[7];
    Quad7() {
        const double s15 = std::sqrt(15.0);
        bary[0][0] = bary[0][1] = bary[0][2] = 1.0 / 3.0;
        weight[0] = 9.0 / 40.0;
        double a1 = (6.0 - s15) / 21.0, w1 = (155.0 - s15) / 1200.0;
        double a2 = (6.0 + s15) / 21.0, w2 = (155.0 + s15) / 1200.0;
        for (int k = 0; k < 3; ++k) {
            for (int j = 0; j < 3; ++j) bary[1 + k][j] = a1;
            bary[1 + k][k] = 1.0 - 2.0 * a1;
            weight[1 + k] = w1;
            for (int j = 0; j < 3; ++j) bary[4 + k][j] = a2;
            bary[4 + k][k] = 1.0 - 2.0 * a2;
            weight[4 + k] = w2;
        }
    }
};

/// L2 and H1-seminorm errors of a P1 solution against exact fields.
inline std::pair<double, double> error_norms(
    const Triangulation& m, const FESolution& sol,
    const std::function<double(double, double)>& exact,
    const std::function<Vec2(double, double)>& exact_grad) {
    static const Quad7 quad;
    auto grads = element_gradients(m, sol);
    double l2 = 0.0, h1 = 0.0;
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangle(t);
        const Vec2& p0 = m.vertex(tr.v[0]);
        const Vec2& p1 = m.vertex(tr.v[1]);
        const Vec2& p2 = m.vertex(tr.v[2]);
        double area = m.signed_area(t);
        double u0 = sol.nodal[static_cast<std::size_t>(tr.v[0])];
        double u1 = sol.nodal[static_cast<std::size_t>(tr.v[1])];
        double u2 = sol.nodal[static_cast<std::size_t>(tr.v[2])];
        const Vec2& g = grads[static_cast<std::size_t>(t)];
        for (int q = 0; q < 7; ++q) {
            double l0 = quad.bary[q][0], l1 = quad.bary[q][1], l2b = quad.bary[q][2];
            double x = l0 * p0.x + l1 * p1.x + l2b * p2.x;
            double y = l0 * p0.y + l1 * p1.y + l2b * p2.y;
            double uh = l0 * u0 + l1 * u1 + l2b * u2;
            double de = uh - exact(x, y);
            l2 += quad.weight[q] * area * de * de;
            Vec2 ge = exact_grad(x, y);
            double dx = g.x - ge.x, dy = g.y - ge.y;
            h1 += quad.weight[q] * area * (dx * dx + dy * dy);
        }
    }
    return {std::sqrt(l2), std::sqrt(h1)};
}

/// Brute-force half-jump sum: scans all triangle pairs for shared edges.
/// Quadratic in the element count, for small meshes only.
inline double jump_sum_oracle(const Triangulation& m, const FESolution& sol,
                              const DiffusionCoefficient& a) {
    auto grads = element_gradients(m, sol);
    double total = 0.0;
    for (int s = 0; s < m.triangle_count(); ++s) {
        for (int t = s + 1; t < m.triangle_count(); ++t) {
            std::vector<int> shared;
            for (int ks = 0; ks < 3; ++ks)
                for (int kt = 0; kt < 3; ++kt)
                    if (m.triangle(s).v[static_cast<std::size_t>(ks)] ==
                        m.triangle(t).v[static_cast<std::size_t>(kt)])
                        shared.push_back(m.triangle(s).v[static_cast<std::size_t>(ks)]);
            if (shared.size() != 2) continue;
            const Vec2& pa = m.vertex(shared[0]);
            const Vec2& pb = m.vertex(shared[1]);
            double he = std::hypot(pb.x - pa.x, pb.y - pa.y);
            double nx = (pb.y - pa.y) / he;
            double ny = -(pb.x - pa.x) / he;
            double as = a.value(sol.parameter, m.triangle(s).label);
            double at = a.value(sol.parameter, m.triangle(t).label);
            double jump = as * (grads[static_cast<std::size_t>(s)].x * nx +
                                grads[static_cast<std::size_t>(s)].y * ny) -
                          at * (grads[static_cast<std::size_t>(t)].x * nx +
                                grads[static_cast<std::size_t>(t)].y * ny);
            total += 2.0 * (he * he * jump * jump * 0.25);  // both incident elements
        }
    }
    return total;
}

}  // namespace scfem::oracles
