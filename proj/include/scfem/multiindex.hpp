#pragma once

// Multi-index machinery for sparse-grid collocation: downward-closed index
// sets, margins, reduced sets, maximal margin points, and the doubling rule
// that ties index levels to Clenshaw-Curtis node counts.

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scfem {

/// Node count for a given level: 0, 1, 3, 5, 9, 17, ...
/// Guarantees nestedness of the Clenshaw-Curtis grids.
inline int doubling_node_count(int level) {
    if (level < 0) throw std::invalid_argument("doubling_node_count: negative level");
    if (level == 0) return 0;
    if (level == 1) return 1;
    if (level > 30) throw std::invalid_argument("doubling_node_count: level too large");
    return (1 << (level - 1)) + 1;
}

/// Multi-index with positive entries. Ordered lexicographically
/// (entries compared left to right).
class MultiIndex {
public:
    explicit MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
        if (entries_.empty())
            throw std::invalid_argument("MultiIndex: dimension must be >= 1");
        for (int e : entries_)
            if (e < 1) throw std::invalid_argument("MultiIndex: entries must be >= 1");
    }
    MultiIndex(std::initializer_list<int> entries)
        : MultiIndex(std::vector<int>(entries)) {}

    static MultiIndex ones(int dim) {
        return MultiIndex(std::vector<int>(static_cast<std::size_t>(require_dim(dim)), 1));
    }

    int dim() const { return static_cast<int>(entries_.size()); }
    int operator[](int n) const { return entries_[static_cast<std::size_t>(n)]; }
    const std::vector<int>& entries() const { return entries_; }

    int sum() const { return std::accumulate(entries_.begin(), entries_.end(), 0); }
    int max_entry() const { return *std::max_element(entries_.begin(), entries_.end()); }

    /// Copy with entry n shifted by delta; the result must stay positive.
    MultiIndex shifted(int n, int delta) const {
        std::vector<int> e = entries_;
        e.at(static_cast<std::size_t>(n)) += delta;
        return MultiIndex(std::move(e));
    }

    bool operator==(const MultiIndex& o) const { return entries_ == o.entries_; }
    bool operator<(const MultiIndex& o) const { return entries_ < o.entries_; }
    bool operator<=(const MultiIndex& o) const { return entries_ <= o.entries_; }

    /// Componentwise comparison: true if this[n] <= o[n] for all n.
    bool dominated_by(const MultiIndex& o) const {
        if (dim() != o.dim()) throw std::invalid_argument("MultiIndex: dimension mismatch");
        for (int n = 0; n < dim(); ++n)
            if ((*this)[n] > o[n]) return false;
        return true;
    }

    std::string str() const {
        std::ostringstream os;
        os << '(';
        for (int n = 0; n < dim(); ++n) os << (n ? "," : "") << (*this)[n];
        os << ')';
        return os.str();
    }

private:
    static int require_dim(int dim) {
        if (dim < 1) throw std::invalid_argument("MultiIndex: dimension must be >= 1");
        return dim;
    }
    std::vector<int> entries_;
};

/// Product of the entries; bounds the stability constant of the
/// hierarchical surplus attached to the index.
inline long long entry_product(const MultiIndex& i) {
    long long p = 1;
    for (int n = 0; n < i.dim(); ++n) p *= i[n];
    return p;
}

/// Number of collocation points the surplus of index j introduces:
/// the product over directions of the node-count increments.
inline long long surplus_work(const MultiIndex& j) {
    long long w = 1;
    for (int n = 0; n < j.dim(); ++n)
        w *= static_cast<long long>(doubling_node_count(j[n]) - doubling_node_count(j[n] - 1));
    return w;
}

/// Finite downward-closed set of multi-indices, stored sorted
/// lexicographically. Immutable after construction.
class MultiIndexSet {
public:
    MultiIndexSet(int dim, std::vector<MultiIndex> members)
        : dim_(dim), members_(std::move(members)) {
        if (dim_ < 1) throw std::invalid_argument("MultiIndexSet: dimension must be >= 1");
        for (const auto& m : members_)
            if (m.dim() != dim_)
                throw std::invalid_argument("MultiIndexSet: member dimension mismatch");
        std::sort(members_.begin(), members_.end());
        members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
        verify_downward_closed();
    }

    /// The set {(1,...,1)}.
    static MultiIndexSet initial(int dim) {
        return MultiIndexSet(dim, {MultiIndex::ones(dim)});
    }

    /// Axis-aligned rectangle of indices between all-ones and `corner`.
    static MultiIndexSet rectangle(const MultiIndex& corner) {
        std::vector<MultiIndex> members;
        std::vector<int> cur(static_cast<std::size_t>(corner.dim()), 1);
        for (;;) {
            members.push_back(MultiIndex(cur));
            int n = corner.dim() - 1;
            while (n >= 0 && cur[static_cast<std::size_t>(n)] == corner[n]) {
                cur[static_cast<std::size_t>(n)] = 1;
                --n;
            }
            if (n < 0) break;
            ++cur[static_cast<std::size_t>(n)];
        }
        return MultiIndexSet(corner.dim(), std::move(members));
    }

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(members_.size()); }
    bool empty() const { return members_.empty(); }
    const std::vector<MultiIndex>& members() const { return members_; }

    bool contains(const MultiIndex& i) const {
        return std::binary_search(members_.begin(), members_.end(), i);
    }

    /// Position of i in the sorted member list, or -1.
    int find(const MultiIndex& i) const {
        auto it = std::lower_bound(members_.begin(), members_.end(), i);
        if (it == members_.end() || !(*it == i)) return -1;
        return static_cast<int>(it - members_.begin());
    }

    MultiIndexSet union_with(std::span<const MultiIndex> extra) const {
        std::vector<MultiIndex> m = members_;
        m.insert(m.end(), extra.begin(), extra.end());
        return MultiIndexSet(dim_, std::move(m));
    }

    /// Componentwise maximum over the members.
    MultiIndex corner() const {
        if (empty()) throw std::logic_error("MultiIndexSet: corner of empty set");
        std::vector<int> c(static_cast<std::size_t>(dim_), 1);
        for (const auto& m : members_)
            for (int n = 0; n < dim_; ++n)
                c[static_cast<std::size_t>(n)] = std::max(c[static_cast<std::size_t>(n)], m[n]);
        return MultiIndex(std::move(c));
    }

    bool operator==(const MultiIndexSet& o) const {
        return dim_ == o.dim_ && members_ == o.members_;
    }

private:
    void verify_downward_closed() const {
        for (const auto& i : members_)
            for (int n = 0; n < dim_; ++n)
                if (i[n] > 1 && !contains(i.shifted(n, -1)))
                    throw std::invalid_argument(
                        "MultiIndexSet: not downward-closed, missing backward neighbor of " + i.str());
    }

    int dim_;
    std::vector<MultiIndex> members_;
};

/// Margin of a set: the indices one step outside it, together with the
/// generating set they were computed from.
struct Margin {
    std::vector<MultiIndex> indices;  // sorted lexicographically
    MultiIndexSet generated_from;
};

inline Margin margin(const MultiIndexSet& I) {
    if (I.empty()) throw std::invalid_argument("margin: empty index set");
    std::vector<MultiIndex> out;
    for (const auto& j : I.members())
        for (int n = 0; n < I.dim(); ++n) {
            MultiIndex cand = j.shifted(n, 1);
            if (!I.contains(cand)) out.push_back(std::move(cand));
        }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return Margin{std::move(out), I};
}

inline bool in_margin(const MultiIndex& i, const MultiIndexSet& I) {
    if (i.dim() != I.dim()) throw std::invalid_argument("in_margin: dimension mismatch");
    if (I.contains(i)) return false;
    for (int n = 0; n < i.dim(); ++n)
        if (i[n] > 1 && I.contains(i.shifted(n, -1))) return true;
    return false;
}

/// Smallest margin subset containing i whose union with I stays
/// downward-closed; equals the rectangle of i minus I.
inline std::vector<MultiIndex> reduced_set(const MultiIndex& i, const MultiIndexSet& I) {
    if (!in_margin(i, I))
        throw std::invalid_argument("reduced_set: " + i.str() + " is not in the margin");
    std::vector<MultiIndex> out;
    MultiIndexSet box = MultiIndexSet::rectangle(i);
    for (const auto& j : box.members())
        if (!I.contains(j)) out.push_back(j);
    return out;  // rectangle members are sorted already
}

/// Maximal points of the margin: indices that exceed every other margin
/// index in at least one direction. A singleton margin is vacuously maximal.
inline std::vector<MultiIndex> maximal_points(const MultiIndexSet& I) {
    Margin m = margin(I);
    std::vector<MultiIndex> out;
    for (const auto& i : m.indices) {
        bool maximal = true;
        for (const auto& j : m.indices) {
            if (i == j) continue;
            bool exceeds = false;
            for (int n = 0; n < I.dim(); ++n)
                if (i[n] > j[n]) { exceeds = true; break; }
            if (!exceeds) { maximal = false; break; }
        }
        if (maximal) out.push_back(i);
    }
    return out;
}

}  // namespace scfem
