#pragma once

// A-posteriori estimators for the collocation solution: the parametric
// indicator per margin index (hierarchical surplus of the weighted
// gradient field, sup-sampled over the parameter box with a Monte Carlo
// spatial norm) and the Lagrange-weighted combination of the per-point
// FE residual estimators.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "fem.hpp"
#include "mesh.hpp"
#include "sparse_grid.hpp"

namespace scfem {

/// Monte Carlo sample of the spatial domain, interior points only.
struct SpatialSampleSet {
    std::uint64_t seed = 0;
    std::vector<Vec2> points;

    static SpatialSampleSet uniform(int count, std::uint64_t seed) {
        if (count < 1) throw std::invalid_argument("SpatialSampleSet: count must be >= 1");
        SpatialSampleSet s;
        s.seed = seed;
        std::mt19937_64 rng(seed);
        auto draw = [&rng]() {
            for (;;) {
                double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                if (u > 0.0) return u;  // keep points strictly interior
            }
        };
        s.points.resize(static_cast<std::size_t>(count));
        for (auto& p : s.points) {
            p.x = draw();
            p.y = draw();
        }
        return s;
    }
};

/// Backward neighbors of a margin index inside the set: the members j
/// with j = i - e_n for some direction. The surplus applied to the
/// interpolant reduces to the sum over exactly these indices.
inline std::vector<MultiIndex> backward_neighbors(const MultiIndex& i, const MultiIndexSet& I) {
    if (!in_margin(i, I))
        throw std::invalid_argument("backward_neighbors: " + i.str() + " is not in the margin");
    std::vector<MultiIndex> out;
    for (int n = 0; n < i.dim(); ++n) {
        if (i[n] <= 1) continue;
        MultiIndex j = i.shifted(n, -1);
        if (I.contains(j)) out.push_back(std::move(j));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Sup over theta of the spatial RMS norm of the surplus of `outer`
/// applied to z -> a(z,.) * (sum_{j in inner} surplus_j[gradients])(z,.).
///
/// `gradients` has one column per grid point holding the x-components at
/// all spatial samples stacked on the y-components; `pi_labels` gives the
/// subdomain label of each spatial sample so the coefficient can be
/// evaluated exactly at (z', sample).
inline double surplus_chain_sup_norm(const MultiIndex& outer,
                                     std::span<const MultiIndex> inner,
                                     const SparseGrid& grid,
                                     const Eigen::MatrixXd& gradients,
                                     const DiffusionCoefficient& a,
                                     std::span<const int> pi_labels,
                                     const ParamSampleSet& theta) {
    const int P = static_cast<int>(pi_labels.size());
    if (P < 1) throw std::invalid_argument("surplus_chain_sup_norm: empty spatial sample");
    if (gradients.rows() != 2 * P || gradients.cols() != grid.size())
        throw std::invalid_argument("surplus_chain_sup_norm: gradient matrix shape mismatch");
    if (theta.dim != grid.dim() || outer.dim() != grid.dim() || a.dim() != grid.dim())
        throw std::invalid_argument("surplus_chain_sup_norm: dimension mismatch");

    TensorGrid tg(outer);
    const int M = tg.size();
    const int H = grid.size();

    // Field samples of the inner sum at the outer tensor nodes, scaled by
    // the coefficient per spatial sample.
    Eigen::MatrixXd inner_w = Eigen::MatrixXd::Zero(H, M);
    std::vector<double> zp;
    for (int k = 0; k < M; ++k) {
        tg.point(k, zp);
        for (const auto& j : inner) {
            auto w = surplus_weights(grid, j, zp);
            for (int id = 0; id < H; ++id) inner_w(id, k) += w[static_cast<std::size_t>(id)];
        }
    }
    Eigen::MatrixXd field = gradients * inner_w;  // 2P x M
    std::vector<double> aval(static_cast<std::size_t>(a.label_count()));
    for (int k = 0; k < M; ++k) {
        tg.point(k, zp);
        for (int label = 0; label < a.label_count(); ++label)
            aval[static_cast<std::size_t>(label)] = a.value(zp, label);
        for (int r = 0; r < P; ++r) {
            double s = aval[static_cast<std::size_t>(pi_labels[static_cast<std::size_t>(r)])];
            field(r, k) *= s;
            field(P + r, k) *= s;
        }
    }

    // Outer surplus applied per theta sample, in chunks to bound memory.
    const int T = static_cast<int>(theta.points.size());
    const int chunk = 128;
    Eigen::MatrixXd outer_w(M, chunk);
    Eigen::MatrixXd vals(2 * P, chunk);
    double sup = 0.0;
    for (int t0 = 0; t0 < T; t0 += chunk) {
        int cols = std::min(chunk, T - t0);
        for (int c = 0; c < cols; ++c) {
            auto w = tensor_surplus_weights(tg, theta.points[static_cast<std::size_t>(t0 + c)]);
            for (int k = 0; k < M; ++k) outer_w(k, c) = w[static_cast<std::size_t>(k)];
        }
        vals.leftCols(cols).noalias() = field * outer_w.leftCols(cols);
        for (int c = 0; c < cols; ++c) {
            double norm = std::sqrt(vals.col(c).squaredNorm() / static_cast<double>(P));
            if (norm > sup) sup = norm;
        }
    }
    return sup;
}

/// Parametric indicator of one margin index through the reduced
/// backward-neighbor form.
inline double parametric_indicator(const MultiIndex& i, const MultiIndexSet& I,
                                   const SparseGrid& grid, const Eigen::MatrixXd& gradients,
                                   const DiffusionCoefficient& a,
                                   std::span<const int> pi_labels,
                                   const ParamSampleSet& theta) {
    auto inner = backward_neighbors(i, I);
    return surplus_chain_sup_norm(i, inner, grid, gradients, a, pi_labels, theta);
}

struct ParametricEstimate {
    std::vector<MultiIndex> margin;  // lex order
    std::vector<double> per_index;   // aligned with margin
    double total = 0.0;              // sum in margin order
};

inline ParametricEstimate parametric_estimator(const MultiIndexSet& I, const SparseGrid& grid,
                                               const Eigen::MatrixXd& gradients,
                                               const DiffusionCoefficient& a,
                                               std::span<const int> pi_labels,
                                               const ParamSampleSet& theta) {
    Margin mg = margin(I);
    if (mg.indices.empty())
        throw std::logic_error("parametric_estimator: empty margin");
    ParametricEstimate est;
    est.margin = mg.indices;
    est.per_index.reserve(est.margin.size());
    for (const auto& i : est.margin)
        est.per_index.push_back(
            parametric_indicator(i, I, grid, gradients, a, pi_labels, theta));
    for (double v : est.per_index) est.total += v;
    return est;
}

/// FE part: sum over collocation points of eta_y * ||L_y||, in point
/// creation order.
inline double weighted_fe_total(std::span<const double> eta_per_point,
                                std::span<const double> lagrange_norms) {
    if (eta_per_point.size() != lagrange_norms.size())
        throw std::invalid_argument("weighted_fe_total: size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < eta_per_point.size(); ++k)
        s += eta_per_point[k] * lagrange_norms[k];
    return s;
}

/// Everything the adaptive loop needs to decide the next step.
struct EstimatorReport {
    std::vector<MultiIndex> margin;
    std::vector<double> parametric_per_index;
    double parametric_total = 0.0;
    std::vector<double> fe_per_point;     // eta_y by point id
    std::vector<double> point_weights;    // ||L_y|| by point id
    double fe_total = 0.0;
    double total = 0.0;
};

}  // namespace scfem
