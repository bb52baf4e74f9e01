#pragma once

// Clenshaw-Curtis node families under the doubling rule, plus barycentric
// Lagrange evaluation on them. Node coordinates are cached so that nested
// levels share bitwise-identical values; the count-1 family is the midpoint.

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "multiindex.hpp"

namespace scfem {

inline bool valid_cc_count(int count) {
    if (count == 0 || count == 1) return true;
    if (count < 3) return false;
    int n = count - 1;
    return (n & (n - 1)) == 0;
}

namespace detail {

inline std::vector<double> build_cc_nodes(int count) {
    if (count == 0) return {};
    if (count == 1) return {0.0};
    const int n = count - 1;
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int j = 0; j <= n; ++j) {
        if (2 * j == n)
            v[static_cast<std::size_t>(j)] = 0.0;
        else if (2 * j < n)
            v[static_cast<std::size_t>(j)] =
                -std::cos(std::numbers::pi * (static_cast<double>(j) / static_cast<double>(n)));
        else
            v[static_cast<std::size_t>(j)] = -v[static_cast<std::size_t>(n - j)];
    }
    return v;
}

// 1 / prod_{k != j} (x_j - x_k). Direct evaluation; counts stay small.
inline std::vector<double> build_bary_weights(const std::vector<double>& nodes) {
    const std::size_t m = nodes.size();
    std::vector<double> w(m, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k)
            if (k != j) w[j] /= (nodes[j] - nodes[k]);
    }
    return w;
}

struct NodeFamily {
    std::vector<double> nodes;
    std::vector<double> bary;
};

inline const NodeFamily& node_family(int count) {
    if (!valid_cc_count(count) || count == 0)
        throw std::invalid_argument("cc_nodes: invalid node count " + std::to_string(count));
    static std::map<int, NodeFamily> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(count);
    if (it == cache.end()) {
        NodeFamily fam;
        fam.nodes = build_cc_nodes(count);
        fam.bary = build_bary_weights(fam.nodes);
        it = cache.emplace(count, std::move(fam)).first;
    }
    return it->second;
}

}  // namespace detail

/// Sorted Clenshaw-Curtis abscissae on [-1,1] for a valid count (1 or 2^k+1).
inline const std::vector<double>& cc_nodes(int count) {
    return detail::node_family(count).nodes;
}

inline const std::vector<double>& cc_nodes_for_level(int level) {
    int count = doubling_node_count(level);
    if (count == 0)
        throw std::invalid_argument("cc_nodes_for_level: level 0 has no nodes");
    return cc_nodes(count);
}

/// Lagrange basis values of all nodes of the family at z. Exact unit
/// vector when z coincides with a node, which is what makes surplus
/// differences between nested levels cancel exactly at shared nodes.
inline void lagrange_basis(int count, double z, std::vector<double>& out) {
    const auto& fam = detail::node_family(count);
    const std::size_t m = fam.nodes.size();
    out.assign(m, 0.0);
    if (m == 1) {
        out[0] = 1.0;
        return;
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (z == fam.nodes[j]) {
            out[j] = 1.0;
            return;
        }
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        out[j] = fam.bary[j] / (z - fam.nodes[j]);
        denom += out[j];
    }
    for (std::size_t j = 0; j < m; ++j) out[j] /= denom;
}

inline std::vector<double> lagrange_basis(int count, double z) {
    std::vector<double> out;
    lagrange_basis(count, z, out);
    return out;
}

/// Position of node `pos` of the level grid inside the (level-1) grid,
/// or -1 if it is a new node. Levels 1 and 2 are the special cases
/// {0} and {-1,0,1}.
inline int coarse_node_position(int level, int pos) {
    if (level < 1) throw std::invalid_argument("coarse_node_position: level must be >= 1");
    int count = doubling_node_count(level);
    if (pos < 0 || pos >= count)
        throw std::invalid_argument("coarse_node_position: position out of range");
    if (level == 1) return -1;             // level-0 grid is empty
    if (level == 2) return pos == 1 ? 0 : -1;
    return (pos % 2 == 0) ? pos / 2 : -1;
}

/// Inverse of coarse_node_position: fine-grid position of coarse node `pos`.
inline int fine_node_position(int level, int pos) {
    if (level < 2) throw std::invalid_argument("fine_node_position: level must be >= 2");
    int coarse_count = doubling_node_count(level - 1);
    if (pos < 0 || pos >= coarse_count)
        throw std::invalid_argument("fine_node_position: position out of range");
    if (level == 2) return 1;
    return 2 * pos;
}

}  // namespace scfem
