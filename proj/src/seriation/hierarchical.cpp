#include "mrgen/errors.hpp"
#include "mrgen/seriation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrgen {

std::vector<std::size_t> Dendrogram::leaf_order() const {
    if (leaves == 0) return {};
    std::vector<std::size_t> order;
    order.reserve(leaves);
    std::vector<std::size_t> stack{root()};
    while (!stack.empty()) {
        const auto node = stack.back();
        stack.pop_back();
        if (is_leaf(node)) {
            order.push_back(node);
        } else {
            const auto& m = merge_of(node);
            stack.push_back(m.right);
            stack.push_back(m.left);
        }
    }
    return order;
}

HierarchicalResult hc_order(const DistanceMatrix& d, Linkage linkage) {
    const auto n = d.size();
    if (n == 0) throw ValidationError("hierarchical clustering needs n >= 1");

    // Working dissimilarities between active clusters, indexed by slot. A
    // cluster lives in the slot of its lowest-slot constituent.
    std::vector<double> work(n * n);
    for (std::size_t i = 0; i < n * n; ++i) {
        work[i] = linkage == Linkage::Ward ? d.cells()[i] * d.cells()[i] : d.cells()[i];
    }
    std::vector<bool> active(n, true);
    std::vector<std::size_t> node_of(n), size(n, 1);
    for (std::size_t i = 0; i < n; ++i) node_of[i] = i;

    Dendrogram tree;
    tree.leaves = n;
    tree.merges.reserve(n - 1);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (active[j] && work[i * n + j] < best) {
                    best = work[i * n + j];
                    bi = i;
                    bj = j;
                }
            }
        }
        const double ni = static_cast<double>(size[bi]);
        const double nj = static_cast<double>(size[bj]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double dki = work[k * n + bi];
            const double dkj = work[k * n + bj];
            double updated = 0.0;
            switch (linkage) {
            case Linkage::Single: updated = std::min(dki, dkj); break;
            case Linkage::Complete: updated = std::max(dki, dkj); break;
            case Linkage::Average: updated = (ni * dki + nj * dkj) / (ni + nj); break;
            case Linkage::Ward: {
                const double nk = static_cast<double>(size[k]);
                updated = ((ni + nk) * dki + (nj + nk) * dkj - nk * best) / (ni + nj + nk);
                break;
            }
            }
            work[k * n + bi] = updated;
            work[bi * n + k] = updated;
        }
        const double height = linkage == Linkage::Ward ? std::sqrt(std::max(best, 0.0)) : best;
        tree.merges.push_back({node_of[bi], node_of[bj], height});
        node_of[bi] = n + step;
        size[bi] += size[bj];
        active[bj] = false;
    }
    auto order = tree.leaf_order();
    return {std::move(tree), Permutation(std::move(order))};
}

namespace {

/// Per-node leaf sets and child lookups for the leaf-ordering dynamic program.
struct TreeIndex {
    std::vector<std::vector<std::size_t>> leaves_of; // sorted
    const Dendrogram& tree;

    explicit TreeIndex(const Dendrogram& t) : tree(t) {
        const auto total = t.leaves + t.merges.size();
        leaves_of.resize(total);
        for (std::size_t i = 0; i < t.leaves; ++i) leaves_of[i] = {i};
        for (std::size_t k = 0; k < t.merges.size(); ++k) {
            const auto& m = t.merges[k];
            auto& out = leaves_of[t.leaves + k];
            out = leaves_of[m.left];
            out.insert(out.end(), leaves_of[m.right].begin(), leaves_of[m.right].end());
            std::sort(out.begin(), out.end());
        }
    }

    bool contains(std::size_t node, std::size_t leaf) const {
        const auto& v = leaves_of[node];
        return std::binary_search(v.begin(), v.end(), leaf);
    }

    /// Leaves that can close an ordering of `node` which opens with `leaf`.
    const std::vector<std::size_t>& partners(std::size_t node, std::size_t leaf) const {
        if (tree.is_leaf(node)) return leaves_of[node];
        const auto& m = tree.merge_of(node);
        return contains(m.left, leaf) ? leaves_of[m.right] : leaves_of[m.left];
    }
};

} // namespace

Permutation olo_order(const DistanceMatrix& d, const Dendrogram& tree) {
    const auto n = d.size();
    if (tree.leaves != n || tree.merges.size() + 1 != std::max<std::size_t>(n, 1)) {
        throw DimensionError("dendrogram does not match distance matrix");
    }
    if (n <= 2) return Permutation(tree.leaf_order());

    const TreeIndex index(tree);
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // cost[i*n+j]: cheapest ordering of lca(i, j) running from i to j.
    std::vector<double> cost(n * n, kInf);
    for (std::size_t i = 0; i < n; ++i) cost[i * n + i] = 0.0;

    std::vector<double> via(n);
    for (std::size_t k = 0; k < tree.merges.size(); ++k) {
        const auto& m = tree.merges[k];
        const auto& left = index.leaves_of[m.left];
        const auto& right = index.leaves_of[m.right];
        for (auto i : left) {
            const auto& inner_left = index.partners(m.left, i);
            for (auto l : right) {
                double best = kInf;
                for (auto kk : inner_left) best = std::min(best, cost[i * n + kk] + d(kk, l));
                via[l] = best;
            }
            for (auto j : right) {
                double best = kInf;
                for (auto l : index.partners(m.right, j)) best = std::min(best, via[l] + cost[l * n + j]);
                cost[i * n + j] = best;
                cost[j * n + i] = best;
            }
        }
    }

    // Rebuilds the ordering of `node` from `first` to `last`.
    std::vector<std::size_t> order;
    order.reserve(n);
    auto expand = [&](auto&& self, std::size_t node, std::size_t first, std::size_t last) -> void {
        if (tree.is_leaf(node)) {
            order.push_back(node);
            return;
        }
        const auto& m = tree.merge_of(node);
        if (!index.contains(m.left, first)) {
            // Build first..last as the reverse of last..first.
            const auto mark = order.size();
            self(self, node, last, first);
            std::reverse(order.begin() + static_cast<std::ptrdiff_t>(mark), order.end());
            return;
        }
        double best = kInf;
        std::size_t bk = first, bl = last;
        for (auto kk : index.partners(m.left, first)) {
            for (auto l : index.partners(m.right, last)) {
                const double c = cost[first * n + kk] + d(kk, l) + cost[l * n + last];
                if (c < best) {
                    best = c;
                    bk = kk;
                    bl = l;
                }
            }
        }
        self(self, m.left, first, bk);
        self(self, m.right, bl, last);
    };

    const auto root = tree.root();
    const auto& rm = tree.merge_of(root);
    double best = kInf;
    std::size_t bi = 0, bj = 0;
    for (auto i : index.leaves_of[rm.left]) {
        for (auto j : index.leaves_of[rm.right]) {
            if (cost[i * n + j] < best) {
                best = cost[i * n + j];
                bi = i;
                bj = j;
            }
        }
    }
    expand(expand, root, bi, bj);
    return Permutation(std::move(order));
}

} // namespace mrgen
