#pragma once

// Sparse collocation grids over downward-closed index sets: point
// enumeration with stable ids, combination-technique coefficients,
// interpolation and hierarchical-surplus weight vectors, and Lagrange
// sup norms sampled over a parameter sample set.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "multiindex.hpp"
#include "nodes.hpp"

namespace scfem {

/// Full tensor grid of CC nodes for one level vector. Points are
/// enumerated with the last dimension varying fastest.
class TensorGrid {
public:
    explicit TensorGrid(MultiIndex levels) : levels_(std::move(levels)) {
        counts_.reserve(static_cast<std::size_t>(levels_.dim()));
        size_ = 1;
        for (int n = 0; n < levels_.dim(); ++n) {
            int c = doubling_node_count(levels_[n]);
            counts_.push_back(c);
            size_ *= c;
        }
    }

    int dim() const { return levels_.dim(); }
    int size() const { return size_; }
    const MultiIndex& levels() const { return levels_; }
    int count(int n) const { return counts_[static_cast<std::size_t>(n)]; }

    void digits(int k, std::vector<int>& out) const {
        out.resize(static_cast<std::size_t>(dim()));
        for (int n = dim() - 1; n >= 0; --n) {
            int c = counts_[static_cast<std::size_t>(n)];
            out[static_cast<std::size_t>(n)] = k % c;
            k /= c;
        }
    }

    void point(int k, std::vector<double>& out) const {
        out.resize(static_cast<std::size_t>(dim()));
        for (int n = dim() - 1; n >= 0; --n) {
            int c = counts_[static_cast<std::size_t>(n)];
            out[static_cast<std::size_t>(n)] = cc_nodes(c)[static_cast<std::size_t>(k % c)];
            k /= c;
        }
    }

private:
    MultiIndex levels_;
    std::vector<int> counts_;
    int size_;
};

/// Combination-technique coefficient of each member of I, in member order:
/// c_i = sum over binary offsets b with i+b in I of (-1)^{|b|}.
inline std::vector<long long> combination_coefficients(const MultiIndexSet& I) {
    if (I.empty()) throw std::invalid_argument("combination_coefficients: empty index set");
    const int N = I.dim();
    std::vector<long long> c(static_cast<std::size_t>(I.size()), 0);
    for (int mi = 0; mi < I.size(); ++mi) {
        const MultiIndex& i = I.members()[static_cast<std::size_t>(mi)];
        for (int mask = 0; mask < (1 << N); ++mask) {
            std::vector<int> e = i.entries();
            int bits = 0;
            for (int n = 0; n < N; ++n)
                if (mask & (1 << n)) {
                    ++e[static_cast<std::size_t>(n)];
                    ++bits;
                }
            if (I.contains(MultiIndex(e)))
                c[static_cast<std::size_t>(mi)] += (bits % 2 == 0) ? 1 : -1;
        }
    }
    return c;
}

/// Union of the tensor grids of all members of a downward-closed set.
/// Point ids are stable: extending the index set keeps existing ids and
/// appends the new points in discovery order.
class SparseGrid {
public:
    explicit SparseGrid(MultiIndexSet I) : I_(std::move(I)) {
        if (I_.empty()) throw std::invalid_argument("SparseGrid: empty index set");
        absorb_members();
    }

    /// Grid over a superset of the current index set, reusing this grid's
    /// point ids for all existing points.
    SparseGrid extended(const MultiIndexSet& superset) const {
        if (superset.dim() != I_.dim())
            throw std::invalid_argument("SparseGrid::extended: dimension mismatch");
        for (const auto& i : I_.members())
            if (!superset.contains(i))
                throw std::invalid_argument("SparseGrid::extended: not a superset");
        SparseGrid g(*this, superset);
        return g;
    }

    const MultiIndexSet& index_set() const { return I_; }
    int dim() const { return I_.dim(); }
    int size() const { return static_cast<int>(points_.size()); }
    const std::vector<double>& point(int id) const {
        return points_[static_cast<std::size_t>(id)];
    }
    const std::vector<std::vector<double>>& points() const { return points_; }

    /// Id of a point with exactly these coordinates, or -1.
    int point_id(std::span<const double> coords) const {
        std::vector<double> key(coords.begin(), coords.end());
        auto it = point_ids_.find(key);
        return it == point_ids_.end() ? -1 : it->second;
    }

    /// Aligned with index_set().members().
    const std::vector<long long>& combination() const { return coeffs_; }

    /// Point ids of the full tensor grid of a member, in tensor order.
    const std::vector<int>& member_point_ids(int member_pos) const {
        return member_ids_[static_cast<std::size_t>(member_pos)];
    }

    /// Member positions whose tensor grid contains the point.
    const std::vector<int>& generating_members(int id) const {
        return provenance_[static_cast<std::size_t>(id)];
    }

private:
    SparseGrid(const SparseGrid& base, const MultiIndexSet& superset)
        : I_(superset), points_(base.points_), point_ids_(base.point_ids_) {
        absorb_members();
    }

    void absorb_members() {
        coeffs_ = combination_coefficients(I_);
        member_ids_.assign(static_cast<std::size_t>(I_.size()), {});
        std::vector<double> p;
        for (int mi = 0; mi < I_.size(); ++mi) {
            TensorGrid tg(I_.members()[static_cast<std::size_t>(mi)]);
            auto& ids = member_ids_[static_cast<std::size_t>(mi)];
            ids.reserve(static_cast<std::size_t>(tg.size()));
            for (int k = 0; k < tg.size(); ++k) {
                tg.point(k, p);
                auto [it, inserted] = point_ids_.try_emplace(p, static_cast<int>(points_.size()));
                if (inserted) points_.push_back(p);
                ids.push_back(it->second);
            }
        }
        provenance_.assign(points_.size(), {});
        for (int mi = 0; mi < I_.size(); ++mi)
            for (int id : member_ids_[static_cast<std::size_t>(mi)])
                provenance_[static_cast<std::size_t>(id)].push_back(mi);
    }

    MultiIndexSet I_;
    std::vector<std::vector<double>> points_;
    std::map<std::vector<double>, int> point_ids_;
    std::vector<long long> coeffs_;
    std::vector<std::vector<int>> member_ids_;
    std::vector<std::vector<int>> provenance_;
};

namespace detail {

// Per-direction sparse factor: (digit in the member's full tensor grid,
// basis weight). Used to enumerate only the nonzero weight products.
struct Factor {
    std::vector<int> digit;
    std::vector<double> weight;
};

template <class Accumulate>
inline void accumulate_product(const std::vector<Factor>& factors, double scale,
                               std::span<const int> strides, Accumulate&& acc) {
    const int N = static_cast<int>(factors.size());
    std::vector<int> pos(static_cast<std::size_t>(N), 0);
    for (;;) {
        double w = scale;
        int flat = 0;
        for (int n = 0; n < N; ++n) {
            const auto& f = factors[static_cast<std::size_t>(n)];
            int p = pos[static_cast<std::size_t>(n)];
            w *= f.weight[static_cast<std::size_t>(p)];
            flat += strides[static_cast<std::size_t>(n)] * f.digit[static_cast<std::size_t>(p)];
        }
        acc(flat, w);
        int n = N - 1;
        while (n >= 0 &&
               pos[static_cast<std::size_t>(n)] + 1 ==
                   static_cast<int>(factors[static_cast<std::size_t>(n)].digit.size())) {
            pos[static_cast<std::size_t>(n)] = 0;
            --n;
        }
        if (n < 0) break;
        ++pos[static_cast<std::size_t>(n)];
    }
}

inline std::vector<int> tensor_strides(const TensorGrid& tg) {
    std::vector<int> s(static_cast<std::size_t>(tg.dim()));
    int stride = 1;
    for (int n = tg.dim() - 1; n >= 0; --n) {
        s[static_cast<std::size_t>(n)] = stride;
        stride *= tg.count(n);
    }
    return s;
}

}  // namespace detail

/// Weight of every grid point in the combination-technique interpolant
/// evaluated at z: interpolant(z) = sum_id weights[id] * values[id].
inline std::vector<double> interpolation_weights(const SparseGrid& g,
                                                 std::span<const double> z) {
    if (static_cast<int>(z.size()) != g.dim())
        throw std::invalid_argument("interpolation_weights: dimension mismatch");
    std::vector<double> weights(static_cast<std::size_t>(g.size()), 0.0);
    const auto& I = g.index_set();
    std::vector<detail::Factor> factors(static_cast<std::size_t>(g.dim()));
    std::vector<double> basis;
    for (int mi = 0; mi < I.size(); ++mi) {
        long long c = g.combination()[static_cast<std::size_t>(mi)];
        if (c == 0) continue;
        const MultiIndex& i = I.members()[static_cast<std::size_t>(mi)];
        TensorGrid tg(i);
        for (int n = 0; n < g.dim(); ++n) {
            auto& f = factors[static_cast<std::size_t>(n)];
            int count = tg.count(n);
            lagrange_basis(count, z[static_cast<std::size_t>(n)], basis);
            f.digit.resize(static_cast<std::size_t>(count));
            f.weight = basis;
            for (int d = 0; d < count; ++d) f.digit[static_cast<std::size_t>(d)] = d;
        }
        auto strides = detail::tensor_strides(tg);
        const auto& ids = g.member_point_ids(mi);
        detail::accumulate_product(factors, static_cast<double>(c), strides,
                                   [&](int flat, double w) {
                                       weights[static_cast<std::size_t>(ids[static_cast<std::size_t>(flat)])] += w;
                                   });
    }
    return weights;
}

/// Weight vector of the hierarchical surplus of a member index at z,
/// over the grid's point ids: the alternating-sign sum of the tensor
/// interpolants of the member level and its backward-shifted levels.
inline std::vector<double> surplus_weights(const SparseGrid& g, const MultiIndex& i,
                                           std::span<const double> z) {
    if (static_cast<int>(z.size()) != g.dim())
        throw std::invalid_argument("surplus_weights: dimension mismatch");
    int mi = g.index_set().find(i);
    if (mi < 0)
        throw std::invalid_argument("surplus_weights: " + i.str() + " not in the index set");
    std::vector<double> weights(static_cast<std::size_t>(g.size()), 0.0);
    TensorGrid tg(i);
    auto strides = detail::tensor_strides(tg);
    const auto& ids = g.member_point_ids(mi);
    const int N = g.dim();
    std::vector<detail::Factor> factors(static_cast<std::size_t>(N));
    std::vector<double> basis;
    for (int mask = 0; mask < (1 << N); ++mask) {
        bool vanishes = false;
        for (int n = 0; n < N && !vanishes; ++n)
            if ((mask & (1 << n)) && i[n] == 1) vanishes = true;  // level-0 interpolant is zero
        if (vanishes) continue;
        int bits = 0;
        for (int n = 0; n < N; ++n) {
            int level = i[n];
            bool shifted = (mask & (1 << n)) != 0;
            if (shifted) ++bits;
            int eff_level = shifted ? level - 1 : level;
            int count = doubling_node_count(eff_level);
            lagrange_basis(count, z[static_cast<std::size_t>(n)], basis);
            auto& f = factors[static_cast<std::size_t>(n)];
            f.digit.resize(static_cast<std::size_t>(count));
            f.weight = basis;
            for (int d = 0; d < count; ++d)
                f.digit[static_cast<std::size_t>(d)] = shifted ? fine_node_position(level, d) : d;
        }
        double sign = (bits % 2 == 0) ? 1.0 : -1.0;
        detail::accumulate_product(factors, sign, strides, [&](int flat, double w) {
            weights[static_cast<std::size_t>(ids[static_cast<std::size_t>(flat)])] += w;
        });
    }
    return weights;
}

/// Surplus weight vector over the positions of a standalone tensor grid
/// (no sparse-grid ids involved).
inline std::vector<double> tensor_surplus_weights(const TensorGrid& tg,
                                                  std::span<const double> z) {
    if (static_cast<int>(z.size()) != tg.dim())
        throw std::invalid_argument("tensor_surplus_weights: dimension mismatch");
    std::vector<double> weights(static_cast<std::size_t>(tg.size()), 0.0);
    const int N = tg.dim();
    const MultiIndex& i = tg.levels();
    auto strides = detail::tensor_strides(tg);
    std::vector<detail::Factor> factors(static_cast<std::size_t>(N));
    std::vector<double> basis;
    for (int mask = 0; mask < (1 << N); ++mask) {
        bool vanishes = false;
        for (int n = 0; n < N && !vanishes; ++n)
            if ((mask & (1 << n)) && i[n] == 1) vanishes = true;
        if (vanishes) continue;
        int bits = 0;
        for (int n = 0; n < N; ++n) {
            int level = i[n];
            bool shifted = (mask & (1 << n)) != 0;
            if (shifted) ++bits;
            int count = doubling_node_count(shifted ? level - 1 : level);
            lagrange_basis(count, z[static_cast<std::size_t>(n)], basis);
            auto& f = factors[static_cast<std::size_t>(n)];
            f.digit.resize(static_cast<std::size_t>(count));
            f.weight = basis;
            for (int d = 0; d < count; ++d)
                f.digit[static_cast<std::size_t>(d)] = shifted ? fine_node_position(level, d) : d;
        }
        double sign = (bits % 2 == 0) ? 1.0 : -1.0;
        detail::accumulate_product(factors, sign, strides,
                                   [&](int flat, double w) { weights[static_cast<std::size_t>(flat)] += w; });
    }
    return weights;
}

namespace detail {

inline void add_scaled(double& acc, double w, double v) { acc += w * v; }
inline double zero_like(double) { return 0.0; }

inline void add_scaled(std::vector<double>& acc, double w, const std::vector<double>& v) {
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * v[k];
}
inline std::vector<double> zero_like(const std::vector<double>& v) {
    return std::vector<double>(v.size(), 0.0);
}

}  // namespace detail

/// Combination-technique interpolant at z of values given per point id.
template <class V>
V interpolate(const SparseGrid& g, std::span<const V> values, std::span<const double> z) {
    if (static_cast<int>(values.size()) != g.size())
        throw std::invalid_argument("interpolate: one value per grid point required");
    auto w = interpolation_weights(g, z);
    V acc = detail::zero_like(values[0]);
    for (int id = 0; id < g.size(); ++id)
        detail::add_scaled(acc, w[static_cast<std::size_t>(id)],
                           values[static_cast<std::size_t>(id)]);
    return acc;
}

/// Hierarchical surplus of a member index applied to point values, at z.
template <class V>
V surplus_evaluate(const SparseGrid& g, const MultiIndex& i, std::span<const V> values,
                   std::span<const double> z) {
    if (static_cast<int>(values.size()) != g.size())
        throw std::invalid_argument("surplus_evaluate: one value per grid point required");
    auto w = surplus_weights(g, i, z);
    V acc = detail::zero_like(values[0]);
    for (int id = 0; id < g.size(); ++id)
        detail::add_scaled(acc, w[static_cast<std::size_t>(id)],
                           values[static_cast<std::size_t>(id)]);
    return acc;
}

/// Finite sample of the parameter box [-1,1]^dim used wherever a sup
/// norm over the parameter domain is needed.
struct ParamSampleSet {
    int dim = 0;
    std::uint64_t seed = 0;
    std::string descriptor;
    std::vector<std::vector<double>> points;

    static ParamSampleSet uniform(int dim, int count, std::uint64_t seed) {
        if (dim < 1 || count < 1)
            throw std::invalid_argument("ParamSampleSet: dim and count must be >= 1");
        ParamSampleSet s;
        s.dim = dim;
        s.seed = seed;
        s.descriptor = "uniform(dim=" + std::to_string(dim) + ",count=" + std::to_string(count) +
                       ",seed=" + std::to_string(seed) + ")";
        std::mt19937_64 rng(seed);
        s.points.resize(static_cast<std::size_t>(count));
        for (auto& p : s.points) {
            p.resize(static_cast<std::size_t>(dim));
            for (auto& x : p) {
                // 53-bit uniform in [0,1), mapped to [-1,1); independent of
                // library distribution implementations.
                double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                x = 2.0 * u - 1.0;
            }
        }
        return s;
    }
};

/// Sup over the sample set of |Lagrange weight of each grid point|.
inline std::vector<double> lagrange_sup_norms(const SparseGrid& g, const ParamSampleSet& theta) {
    if (theta.dim != g.dim())
        throw std::invalid_argument("lagrange_sup_norms: dimension mismatch");
    if (theta.points.empty())
        throw std::invalid_argument("lagrange_sup_norms: empty sample set");
    std::vector<double> norms(static_cast<std::size_t>(g.size()), 0.0);
    for (const auto& z : theta.points) {
        auto w = interpolation_weights(g, z);
        for (int id = 0; id < g.size(); ++id) {
            double a = std::abs(w[static_cast<std::size_t>(id)]);
            if (a > norms[static_cast<std::size_t>(id)]) norms[static_cast<std::size_t>(id)] = a;
        }
    }
    return norms;
}

/// Same for a single collocation point, which must belong to the grid.
inline double lagrange_sup_norm(const SparseGrid& g, std::span<const double> y,
                                const ParamSampleSet& theta) {
    int id = g.point_id(y);
    if (id < 0) throw std::invalid_argument("lagrange_sup_norm: not a collocation point");
    double norm = 0.0;
    for (const auto& z : theta.points) {
        auto w = interpolation_weights(g, z);
        double a = std::abs(w[static_cast<std::size_t>(id)]);
        if (a > norm) norm = a;
    }
    return norm;
}

}  // namespace scfem
