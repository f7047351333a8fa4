#pragma once

#include <functional>
#include <vector>

#include "geomatch/generate.hpp"
#include "geomatch/geometry.hpp"
#include "geomatch/instance.hpp"
#include "geomatch/matcher.hpp"
#include "geomatch/rng.hpp"

namespace testsup {

using namespace geomatch;

inline RawInstance random_instance(int n, int d, uint64_t seed, double box = 100.0) {
    CounterRng rng{seed};
    RawInstance inst;
    inst.d = d;
    inst.a.assign(size_t(n), PtD{});
    inst.b.assign(size_t(n), PtD{});
    uint64_t c = 0;
    for (auto* pts : {&inst.a, &inst.b})
        for (auto& p : *pts)
            for (int i = 0; i < d; ++i) p[i] = box * rng.uniform(c++);
    return inst;
}

inline PtD pt2(double x, double y) {
    PtD p{};
    p[0] = x;
    p[1] = y;
    return p;
}

inline double path_cost(const std::vector<PtD>& a, const std::vector<PtD>& b, int d,
                        const std::vector<int>& match_a, Norm norm = Norm::L2) {
    double c = 0.0;
    for (size_t i = 0; i < match_a.size(); ++i)
        if (match_a[i] >= 0) c += dist(a[i], b[size_t(match_a[i])], d, norm);
    return c;
}

// Materialized-edge-list audits of the pathlet machinery over every cached
// pair expansion of every stable cell. Returns the number of violations.
struct PathletAudit {
    int64_t intersects_checked = 0, intersects_wrong = 0;
    int64_t lce_checked = 0, lce_wrong = 0;
    int64_t median_checked = 0, median_wrong = 0;
    int64_t adj_checked = 0, adj_wrong = 0;
    int64_t simplicity_wrong = 0;
    int64_t table_checked = 0, table_wrong = 0;
    int64_t total_wrong() const {
        return intersects_wrong + lce_wrong + median_wrong + adj_wrong + simplicity_wrong +
               table_wrong;
    }
};

inline void audit_engine_pathlets(Engine& eng, PathletAudit& audit, int max_pairs = 400) {
    PathletStore& store = eng.store();
    const Hierarchy& H = eng.hier();
    const PathCtx& ctx = store.ctx();
    struct Item {
        Part part;
        std::vector<MatchEdge> edges;
    };
    std::vector<Item> items;
    for (int ci = 0; ci < H.num_cells() && int(items.size()) < max_pairs; ++ci) {
        const CellState& cs = eng.cell_state(ci);
        if (!cs.stable || cs.sA == 0) continue;
        for (int dir = 0; dir < 2 && int(items.size()) < max_pairs; ++dir) {
            const auto& exps = dir == 0 ? cs.exp_ab : cs.exp_ba;
            for (const PairExp& pe : exps) {
                if (!pe.exists || !pe.tree || pe.tree->m_total == 0) continue;
                Item it;
                it.part.slice = Slice{pe.tree, 0, pe.tree->m_total - 1};
                store.report_part(it.part, it.edges);
                // simplicity: no duplicate matching edge
                std::set<std::pair<int, int>> seen;
                for (const auto& e : it.edges)
                    if (!seen.insert({e.a, e.b}).second) ++audit.simplicity_wrong;
                items.push_back(std::move(it));
                if (int(items.size()) >= max_pairs) break;
            }
        }
    }
    // adjusted costs and medians per pathlet
    for (const auto& it : items) {
        SliceAgg agg = store.agg(it.part);
        double expect = 0.0;
        for (size_t i = 0; i < it.edges.size(); ++i) {
            expect += ctx.adj_m(it.edges[i].a, it.edges[i].b);
            if (i + 1 < it.edges.size())
                expect += ctx.adj_nm(it.edges[i].a, it.edges[i + 1].b);
        }
        ++audit.adj_checked;
        if (std::fabs(agg.adj - expect) > 1e-9 * (1.0 + std::fabs(expect))) ++audit.adj_wrong;
        if (!it.edges.empty()) {
            ++audit.median_checked;
            int k = int(it.edges.size());
            int want = (k + 1) / 2 - 1;
            MatchEdge med = store.edge_at(it.part, store.median_rel(it.part));
            if (!(med == it.edges[size_t(want)])) ++audit.median_wrong;
        }
    }
    // pairwise intersects / last-common-edge against set intersection
    size_t cap = std::min(items.size(), size_t(40));
    for (size_t i = 0; i < cap; ++i) {
        for (size_t j = 0; j < cap; ++j) {
            if (i == j) continue;
            auto& A = items[i];
            auto& B = items[j];
            std::set<std::pair<int, int>> sb;
            for (const auto& e : B.edges) sb.insert({e.a, e.b});
            bool expect = false;
            int last_pos = -1;
            for (size_t t = 0; t < A.edges.size(); ++t)
                if (sb.count({A.edges[t].a, A.edges[t].b})) {
                    expect = true;
                    last_pos = int(t);
                }
            ++audit.intersects_checked;
            bool got = store.intersects(A.part, B.part);
            if (got != expect) ++audit.intersects_wrong;
            if (expect) {
                ++audit.lce_checked;
                auto lce = store.last_common_edge(A.part, B.part);
                if (!lce.found || lce.rel1 != last_pos)
                    ++audit.lce_wrong;
                else {
                    MatchEdge e1 = store.edge_at(A.part, lce.rel1);
                    MatchEdge e2 = store.edge_at(B.part, lce.rel2);
                    if (!(e1 == e2)) ++audit.lce_wrong;
                }
            }
        }
    }
}

}  // namespace testsup
