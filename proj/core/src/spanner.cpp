#include "geomatch/spanner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace geomatch {

namespace {

struct SplitNode {
    PtD lo, hi;           // bounding box
    int rep = -1;         // smallest point index in subtree
    int left = -1, right = -1;
    int begin = 0, end = 0;  // range in the index permutation
};

struct SplitTree {
    int d;
    Norm norm;
    const std::vector<PtD>* pts;
    std::vector<int> order;
    std::vector<SplitNode> nodes;

    double box_diam(const SplitNode& nd) const {
        PtD w{};
        for (int i = 0; i < d; ++i) w[i] = nd.hi[i] - nd.lo[i];
        PtD zero{};
        return dist(w, zero, d, norm);
    }
    double box_dist(const SplitNode& x, const SplitNode& y) const {
        PtD g{};
        for (int i = 0; i < d; ++i) {
            double lo = std::max(x.lo[i], y.lo[i]);
            double hi = std::min(x.hi[i], y.hi[i]);
            g[i] = lo > hi ? lo - hi : 0.0;
        }
        PtD zero{};
        return dist(g, zero, d, norm);
    }

    int build(int begin, int end) {
        SplitNode nd;
        nd.begin = begin;
        nd.end = end;
        for (int i = 0; i < d; ++i) {
            nd.lo[i] = 1e300;
            nd.hi[i] = -1e300;
        }
        nd.rep = order[begin];
        for (int t = begin; t < end; ++t) {
            const PtD& p = (*pts)[order[t]];
            nd.rep = std::min(nd.rep, order[t]);
            for (int i = 0; i < d; ++i) {
                nd.lo[i] = std::min(nd.lo[i], p[i]);
                nd.hi[i] = std::max(nd.hi[i], p[i]);
            }
        }
        int id = int(nodes.size());
        nodes.push_back(nd);
        if (end - begin <= 1) return id;
        // split the longest box side at its midpoint; fall back to a median
        // split when all points share the chosen coordinate
        int axis = 0;
        double best = -1.0;
        for (int i = 0; i < d; ++i) {
            double w = nd.hi[i] - nd.lo[i];
            if (w > best) {
                best = w;
                axis = i;
            }
        }
        double mid = 0.5 * (nd.lo[axis] + nd.hi[axis]);
        auto it = std::stable_partition(order.begin() + begin, order.begin() + end,
                                        [&](int idx) { return (*pts)[idx][axis] < mid; });
        int cut = int(it - order.begin());
        if (cut == begin || cut == end) {
            std::stable_sort(order.begin() + begin, order.begin() + end,
                             [&](int x, int y) {
                                 if ((*pts)[x][axis] != (*pts)[y][axis])
                                     return (*pts)[x][axis] < (*pts)[y][axis];
                                 return x < y;
                             });
            cut = (begin + end) / 2;
        }
        int l = build(begin, cut);
        int r = build(cut, end);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }
};

}  // namespace

std::vector<SpannerEdge> build_spanner(const RawInstance& inst, Norm norm) {
    int n = inst.n();
    int d = inst.d;
    std::vector<PtD> all;
    all.reserve(size_t(2) * n);
    all.insert(all.end(), inst.a.begin(), inst.a.end());
    all.insert(all.end(), inst.b.begin(), inst.b.end());
    std::vector<SpannerEdge> edges;
    if (all.size() <= 1) return edges;

    SplitTree tree;
    tree.d = d;
    tree.norm = norm;
    tree.pts = &all;
    tree.order.resize(all.size());
    std::iota(tree.order.begin(), tree.order.end(), 0);
    tree.nodes.reserve(2 * all.size());
    int root = tree.build(0, int(all.size()));

    const double sep = 12.0;  // (sep+4)/(sep-4) = 2
    std::vector<std::pair<int, int>> stack;
    auto well_separated = [&](int x, int y) {
        double r = 0.5 * std::max(tree.box_diam(tree.nodes[x]), tree.box_diam(tree.nodes[y]));
        return tree.box_dist(tree.nodes[x], tree.nodes[y]) >= sep * r;
    };
    auto pair_rec = [&](auto&& self, int x, int y) -> void {
        if (x == y) {
            const SplitNode& nd = tree.nodes[x];
            if (nd.left < 0) return;
            self(self, nd.left, nd.left);
            self(self, nd.right, nd.right);
            self(self, nd.left, nd.right);
            return;
        }
        if (well_separated(x, y)) {
            int u = tree.nodes[x].rep, v = tree.nodes[y].rep;
            if (u > v) std::swap(u, v);
            edges.push_back({u, v, dist(all[u], all[v], d, norm)});
            return;
        }
        // split the node with the larger box
        int big = tree.box_diam(tree.nodes[x]) >= tree.box_diam(tree.nodes[y]) ? x : y;
        if (tree.nodes[big].left < 0) big = (big == x ? y : x);  // leaf, split the other
        if (tree.nodes[big].left < 0) {
            // two singleton leaves that are not separated: emit the direct edge
            int u = tree.nodes[x].rep, v = tree.nodes[y].rep;
            if (u > v) std::swap(u, v);
            edges.push_back({u, v, dist(all[u], all[v], d, norm)});
            return;
        }
        if (big == x) {
            self(self, tree.nodes[x].left, y);
            self(self, tree.nodes[x].right, y);
        } else {
            self(self, x, tree.nodes[y].left);
            self(self, x, tree.nodes[y].right);
        }
    };
    pair_rec(pair_rec, root, root);

    std::sort(edges.begin(), edges.end(), [](const SpannerEdge& e, const SpannerEdge& f) {
        if (e.u != f.u) return e.u < f.u;
        return e.v < f.v;
    });
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const SpannerEdge& e, const SpannerEdge& f) {
                                return e.u == f.u && e.v == f.v;
                            }),
                edges.end());
    return edges;
}

CoarseEstimate coarse_estimate_from_edges(int n, std::vector<SpannerEdge> edges) {
    CoarseEstimate est;
    if (n <= 0) return est;
    std::sort(edges.begin(), edges.end(), [](const SpannerEdge& e, const SpannerEdge& f) {
        if (e.w != f.w) return e.w < f.w;
        if (e.u != f.u) return e.u < f.u;
        return e.v < f.v;
    });
    int total = 2 * n;
    std::vector<int> parent(total), imbalance(total);
    std::iota(parent.begin(), parent.end(), 0);
    for (int i = 0; i < total; ++i) imbalance[i] = i < n ? 1 : -1;
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    int unbalanced = total;  // singletons are unbalanced unless n == 0
    for (const auto& e : edges) {
        if (unbalanced == 0) break;
        int ru = find(e.u), rv = find(e.v);
        if (ru == rv) continue;
        if (imbalance[ru] != 0) --unbalanced;
        if (imbalance[rv] != 0) --unbalanced;
        parent[ru] = rv;
        imbalance[rv] += imbalance[ru];
        if (imbalance[rv] != 0) ++unbalanced;
        est.w0 = e.w;
        if (unbalanced == 0) break;
    }
    return est;
}

CoarseEstimate coarse_estimate(const RawInstance& inst, Norm norm) {
    return coarse_estimate_from_edges(inst.n(), build_spanner(inst, norm));
}

}  // namespace geomatch
