#include "geomatch/simplify.hpp"

#include <cmath>
#include <stdexcept>

namespace geomatch {

namespace {

Part part_from_arc(const ArcExpansion& ax) {
    Part p;
    if (ax.kind == ArcExpansion::MEdge) {
        p.is_leaf = true;
        p.edge = ax.edge;
        p.leaf_cell = ax.leaf_cell;
        p.leaf_level = ax.leaf_level;
    } else if (ax.kind == ArcExpansion::Tree && ax.tree && ax.tree->m_total > 0) {
        p.slice = Slice{ax.tree, 0, ax.tree->m_total - 1};
    } else {
        p.slice = Slice{nullptr, 0, -1};  // no MES content
    }
    return p;
}

void push_nonempty(std::vector<Part>& v, const Part& p) {
    if (!p.empty()) v.push_back(p);
}

double cycle_adj(PathletStore& store, const std::vector<Part>& parts) {
    CompactPath c;
    c.parts = parts;
    c.cycle = true;
    return store.adj_cost(c);
}

}  // namespace

ExpansionResult construct_expansion(PathletStore& store, const std::vector<ArcExpansion>& arcs,
                                    SimplifyStats* stats) {
    ExpansionResult res;
    if (arcs.empty()) throw std::invalid_argument("construct_expansion: empty arc path");
    // tips come from the first/last arc expansions (non-matching ends only)
    if (arcs.front().kind != ArcExpansion::MEdge) res.tip_a = arcs.front().tip_a;
    if (arcs.back().kind != ArcExpansion::MEdge) res.tip_b = arcs.back().tip_b;

    std::vector<Part> incoming;
    for (const auto& ax : arcs) push_nonempty(incoming, part_from_arc(ax));

    std::vector<Part>& xi = res.parts;
    for (size_t i = 0; i < incoming.size(); ++i) {
        Part phi = incoming[i];
        int j = -1;
        for (size_t t = 0; t < xi.size(); ++t) {
            if (store.intersects(phi, xi[t])) {
                j = int(t);
                break;
            }
        }
        if (j < 0) {
            xi.push_back(phi);
            continue;
        }
        auto lce = store.last_common_edge(phi, xi[size_t(j)]);
        if (!lce.found) throw std::logic_error("construct_expansion: intersection lost");
        // cycle C = (e1 -| xi_j) o xi_{j+1..t} o (phi |>- e1)
        std::vector<Part> cyc;
        push_nonempty(cyc, store.suffix_incl(xi[size_t(j)], lce.rel2));
        for (size_t t = size_t(j) + 1; t < xi.size(); ++t) push_nonempty(cyc, xi[t]);
        push_nonempty(cyc, store.prefix_excl(phi, lce.rel1));
        if (stats) ++stats->peels;
        if (cycle_adj(store, cyc) < 0.0) {
            CompactPath c;
            c.parts = std::move(cyc);
            c.cycle = true;
            res.aborted = true;
            res.reducing = simple_reducing_subcycle(store, c, stats);
            return res;
        }
        // keep the simple prefix and continue
        Part pre = store.prefix_excl(xi[size_t(j)], lce.rel2);
        Part suf = store.suffix_incl(phi, lce.rel1);
        xi.resize(size_t(j));
        push_nonempty(xi, pre);
        push_nonempty(xi, suf);
        // the processed phi is fully consumed by the splice; move on
    }
    return res;
}

namespace {

// only-two-intersecting base case: prune-and-search over the first pathlet
CompactPath srs_base_two(PathletStore& store, Part phi1, std::vector<Part> mid, Part phik,
                         SimplifyStats* stats) {
    int m1 = 0;  // left exclusion bound within phi1 ([0, m1) is known clean)
    int64_t guard = 0;
    for (;;) {
        if (++guard > (int64_t(1) << 24))
            throw std::runtime_error("simple_reducing_subcycle: binary search overflow");
        if (stats) ++stats->binary_steps;
        if (phi1.empty() || phik.empty()) {
            CompactPath out;
            push_nonempty(out.parts, phi1);
            for (auto& p : mid) push_nonempty(out.parts, p);
            push_nonempty(out.parts, phik);
            out.cycle = true;
            return out;
        }
        Part window = store.subrange(phi1, m1, phi1.len() - 1);
        if (window.empty() || !store.intersects(window, phik)) {
            CompactPath out;
            push_nonempty(out.parts, phi1);
            for (auto& p : mid) push_nonempty(out.parts, p);
            push_nonempty(out.parts, phik);
            out.cycle = true;
            return out;
        }
        // for windows of one or two edges the median is the window start and
        // halving cannot make progress; splice on the whole window instead
        int w = window.len();
        int f = w <= 2 ? m1 + w : m1 + store.median_rel(window);
        Part before_f = store.subrange(phi1, m1, f - 1);
        if (before_f.empty() || !store.intersects(before_f, phik)) {
            m1 = f;
            continue;
        }
        auto lce = store.last_common_edge(store.prefix_excl(phi1, f), phik);
        if (!lce.found) throw std::logic_error("srs_base_two: intersection lost");
        int r1 = lce.rel1;  // in phi1
        int r2 = lce.rel2;  // in phik
        std::vector<Part> c0;
        push_nonempty(c0, store.prefix_excl(phi1, r1));
        push_nonempty(c0, store.suffix_incl(phik, r2));
        double a0 = cycle_adj(store, c0);
        if (a0 < 0.0) {
            // restart on C~0
            phi1 = store.prefix_excl(phi1, r1);
            phik = store.suffix_incl(phik, r2);
            mid.clear();
            m1 = 0;
        } else {
            // continue on C~I
            phi1 = store.suffix_incl(phi1, r1);
            phik = store.prefix_excl(phik, r2);
            m1 = f - r1;
        }
    }
}

}  // namespace

CompactPath simple_reducing_subcycle(PathletStore& store, const CompactPath& cycle,
                                     SimplifyStats* stats) {
    std::vector<Part> parts;
    for (const auto& p : cycle.parts) push_nonempty(parts, p);
    if (parts.empty()) throw std::invalid_argument("simple_reducing_subcycle: empty cycle");

    double total = cycle_adj(store, parts);
    if (!(total < 0.0))
        throw std::invalid_argument("simple_reducing_subcycle: cycle is not reducing");

    if (parts.size() == 1) {
        CompactPath out;
        out.parts = parts;
        out.cycle = true;
        return out;
    }
    if (parts.size() == 2)
        return srs_base_two(store, parts[0], {}, parts[1], stats);

    std::vector<Part> xi;
    for (size_t i = 0; i < parts.size(); ++i) {
        Part phi = parts[i];
        int j = -1;
        for (int t = int(xi.size()) - 1; t >= 0; --t) {
            if (store.intersects(phi, xi[size_t(t)])) {
                j = t;
                break;
            }
        }
        if (j < 0) {
            xi.push_back(phi);
            continue;
        }
        auto lce = store.last_common_edge(phi, xi[size_t(j)]);
        if (!lce.found) throw std::logic_error("simple_reducing_subcycle: intersection lost");
        if (stats) ++stats->peels;
        // C0 = (e1 -| xi_j) o xi_{j+1..} o (phi |>- e1)
        std::vector<Part> c0;
        Part c0_first = store.suffix_incl(xi[size_t(j)], lce.rel2);
        push_nonempty(c0, c0_first);
        std::vector<Part> c0_mid;
        for (size_t t = size_t(j) + 1; t < xi.size(); ++t) {
            push_nonempty(c0, xi[t]);
            push_nonempty(c0_mid, xi[t]);
        }
        Part c0_last = store.prefix_excl(phi, lce.rel1);
        push_nonempty(c0, c0_last);
        // C_I = xi_{0..j-1} o (xi_j |>- e1) o (e1 -| phi) o parts_{i+1..}
        std::vector<Part> ci;
        for (size_t t = 0; t < size_t(j); ++t) push_nonempty(ci, xi[t]);
        push_nonempty(ci, store.prefix_excl(xi[size_t(j)], lce.rel2));
        push_nonempty(ci, store.suffix_incl(phi, lce.rel1));
        for (size_t t = i + 1; t < parts.size(); ++t) push_nonempty(ci, parts[t]);

        double a_all = cycle_adj(store, parts);  // adj of the remaining cycle
        double a0 = cycle_adj(store, c0);
        double ai = ci.empty() ? 0.0 : cycle_adj(store, ci);
        if (stats) {
            double rel = std::fabs(a_all - a0 - ai) / std::max(1.0, std::fabs(a_all));
            stats->max_conservation_err = std::max(stats->max_conservation_err, rel);
        }
        if (a0 < 0.0) return srs_base_two(store, c0_first, c0_mid, c0_last, stats);
        CompactPath rec;
        rec.parts = std::move(ci);
        rec.cycle = true;
        return simple_reducing_subcycle(store, rec, stats);
    }
    // processed everything without intersections: the cycle is simple
    CompactPath out;
    out.parts = std::move(xi);
    out.cycle = true;
    return out;
}

}  // namespace geomatch
