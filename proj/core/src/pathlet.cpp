#include "geomatch/pathlet.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace geomatch {

namespace {
inline uint64_t cmix(uint64_t h, uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}
}  // namespace

TreePtr PathletStore::concatenate(const std::vector<Part>& parts, int level, int cell_idx) {
    auto tree = std::make_shared<MesTree>();
    tree->id = next_id_++;
    tree->level = level;
    tree->cell_idx = cell_idx;
    tree->kids.reserve(parts.size());
    int leaves = 0;
    double adj = 0.0;
    int prev_a = -1;
    uint64_t content = 0x243f6a8885a308d3ULL;
    for (const auto& p : parts) {
        if (p.empty()) continue;  // empty splices are dropped
        TreeChild ch;
        if (p.is_leaf) {
            ch.is_leaf = true;
            ch.edge = p.edge;
            ch.m = 1;
            ch.adj = ctx_.adj_m(p.edge.a, p.edge.b);
            ch.first_b = p.edge.b;
            ch.last_a = p.edge.a;
            content = cmix(content, 0x1d);
            content = cmix(content, uint64_t(p.edge.a));
            content = cmix(content, uint64_t(p.edge.b));
        } else {
            SliceAgg a = agg(p.slice);
            ch.slice = p.slice;
            ch.m = a.m;
            ch.adj = a.adj;
            ch.first_b = a.first_b;
            ch.last_a = a.last_a;
            content = cmix(content, 0x2e);
            content = cmix(content, p.slice.src->content);
            content = cmix(content, uint64_t(p.slice.lo));
            content = cmix(content, uint64_t(p.slice.hi));
        }
        tree->prefix.push_back(leaves);
        leaves += ch.m;
        if (prev_a >= 0) adj += ctx_.adj_nm(prev_a, ch.first_b);
        adj += ch.adj;
        prev_a = ch.last_a;
        tree->kids.push_back(std::move(ch));
    }
    tree->content = content;
    tree->m_total = leaves;
    tree->adj_total = adj;
    tree->first_b = tree->kids.empty() ? -1 : tree->kids.front().first_b;
    tree->last_a = tree->kids.empty() ? -1 : tree->kids.back().last_a;

    // register the exposed canonical pathlets (the slice kids)
    for (const auto& ch : tree->kids) {
        if (ch.is_leaf) continue;
        auto& row = registry_[ch.slice.src->id];
        if (row.tree.expired()) {
            row.tree = ch.slice.src;
            row.cell_idx = ch.slice.src->cell_idx;
            if (row.cell_idx >= 0) by_cell_[row.cell_idx].push_back(ch.slice.src->id);
        }
        auto key = std::make_pair(ch.slice.lo, ch.slice.hi);
        if (std::find(row.slices.begin(), row.slices.end(), key) == row.slices.end())
            row.slices.push_back(key);
    }
    fresh_.push_back(tree);
    return tree;
}

SliceAgg PathletStore::agg(const Slice& s) const {
    SliceAgg out;
    if (s.empty()) return out;
    const MesTree& t = *s.src;
    int prev_a = -1;
    size_t nk = t.kids.size();
    for (size_t i = 0; i < nk; ++i) {
        int kb = t.prefix[i];
        int ke = kb + t.kids[i].m - 1;
        if (ke < s.lo || kb > s.hi) continue;
        SliceAgg part;
        if (s.lo <= kb && ke <= s.hi) {
            const TreeChild& ch = t.kids[i];
            part.m = ch.m;
            part.adj = ch.adj;
            part.first_b = ch.first_b;
            part.last_a = ch.last_a;
        } else {
            const TreeChild& ch = t.kids[i];
            assert(!ch.is_leaf);
            Slice sub{ch.slice.src, ch.slice.lo + std::max(s.lo, kb) - kb,
                      ch.slice.lo + std::min(s.hi, ke) - kb};
            part = agg(sub);
        }
        if (prev_a >= 0) out.adj += ctx_.adj_nm(prev_a, part.first_b);
        if (out.m == 0) out.first_b = part.first_b;
        out.m += part.m;
        out.adj += part.adj;
        out.last_a = part.last_a;
        prev_a = part.last_a;
    }
    return out;
}

SliceAgg PathletStore::agg(const Part& p) const {
    if (p.is_leaf) {
        SliceAgg a;
        a.m = 1;
        a.adj = ctx_.adj_m(p.edge.a, p.edge.b);
        a.first_b = p.edge.b;
        a.last_a = p.edge.a;
        return a;
    }
    return agg(p.slice);
}

MatchEdge PathletStore::edge_at(const TreePtr& t, int pos) const {
    const MesTree& tr = *t;
    // last kid with prefix <= pos
    size_t i = size_t(std::upper_bound(tr.prefix.begin(), tr.prefix.end(), pos) -
                      tr.prefix.begin()) - 1;
    const TreeChild& ch = tr.kids[i];
    if (ch.is_leaf) return ch.edge;
    return edge_at(ch.slice.src, ch.slice.lo + pos - tr.prefix[i]);
}

MatchEdge PathletStore::edge_at(const Part& p, int rel) const {
    if (p.is_leaf) return p.edge;
    return edge_at(p.slice.src, p.slice.lo + rel);
}

Part PathletStore::prefix_excl(const Part& p, int rel) const {
    return subrange(p, 0, rel - 1);
}

Part PathletStore::suffix_incl(const Part& p, int rel) const {
    return subrange(p, rel, p.len() - 1);
}

Part PathletStore::subrange(const Part& p, int rel_lo, int rel_hi) const {
    Part out;
    if (p.is_leaf) {
        if (rel_lo <= 0 && rel_hi >= 0) return p;
        out.is_leaf = false;
        out.slice = Slice{nullptr, 0, -1};
        return out;
    }
    out.is_leaf = false;
    out.slice = Slice{p.slice.src, p.slice.lo + rel_lo, p.slice.lo + rel_hi};
    if (out.slice.hi < out.slice.lo) out.slice = Slice{nullptr, 0, -1};
    return out;
}

void PathletStore::canon_nodes(const Part& p, std::vector<CanonNode>& out) const {
    if (p.is_leaf) {
        CanonNode u;
        u.is_leaf = true;
        u.edge = p.edge;
        u.cell_idx = p.leaf_cell;
        u.level = p.leaf_level;
        out.push_back(u);
        return;
    }
    canon_nodes_slice(p.slice, out);
}

void PathletStore::canon_nodes_slice(const Slice& s, std::vector<CanonNode>& out) const {
    if (s.empty()) return;
    const MesTree& t = *s.src;
    for (size_t i = 0; i < t.kids.size(); ++i) {
        int kb = t.prefix[i];
        int ke = kb + t.kids[i].m - 1;
        if (ke < s.lo || kb > s.hi) continue;
        const TreeChild& ch = t.kids[i];
        if (s.lo <= kb && ke <= s.hi) {
            CanonNode u;
            if (ch.is_leaf) {
                u.is_leaf = true;
                u.edge = ch.edge;
                u.cell_idx = t.cell_idx;
                u.level = t.level;
            } else {
                u.slice = ch.slice;
                u.cell_idx = ch.slice.src->cell_idx;
                u.level = ch.slice.src->level;
            }
            out.push_back(u);
        } else {
            assert(!ch.is_leaf);
            Slice sub{ch.slice.src, ch.slice.lo + std::max(s.lo, kb) - kb,
                      ch.slice.lo + std::min(s.hi, ke) - kb};
            canon_nodes_slice(sub, out);
        }
    }
}

std::array<int64_t, 8> PathletStore::canon_key(const CanonNode& u, const CanonNode& v) const {
    auto code = [](const CanonNode& w) {
        if (w.is_leaf)
            return std::array<int64_t, 4>{-1, w.edge.a, w.edge.b, w.level};
        return std::array<int64_t, 4>{int64_t(w.slice.src->id), w.slice.lo, w.slice.hi,
                                      w.level};
    };
    auto cu = code(u), cv = code(v);
    if (cv < cu) std::swap(cu, cv);
    return {cu[0], cu[1], cu[2], cu[3], cv[0], cv[1], cv[2], cv[3]};
}

bool PathletStore::canon_intersect(const CanonNode& u, const CanonNode& v,
                                   std::map<std::array<int64_t, 8>, bool>& memo,
                                   bool use_table) {
    if (u.is_leaf && v.is_leaf) return u.edge == v.edge;
    // slices of one tree: the MES is simple, so ranges intersect iff they
    // overlap as intervals
    if (!u.is_leaf && !v.is_leaf && u.slice.src->id == v.slice.src->id)
        return u.slice.lo <= v.slice.hi && v.slice.lo <= u.slice.hi;
    if (u.cell_idx >= 0 && v.cell_idx >= 0 && !ctx_.H->boxes_intersect(u.cell_idx, v.cell_idx))
        return false;
    // a bridge edge of level j cannot appear inside expansions assembled
    // strictly below level j
    if (u.is_leaf && u.level > v.level) return false;
    if (v.is_leaf && v.level > u.level) return false;
    // descend the non-leaf (same-level slices may hold same-level leaves);
    // for slice pairs descend the higher, with the table memoizing
    // same-level slice verdicts
    const CanonNode* down = nullptr;
    const CanonNode* other = nullptr;
    bool same_level_slices = false;
    if (u.is_leaf) {
        down = &v;
        other = &u;
    } else if (v.is_leaf) {
        down = &u;
        other = &v;
    } else if (u.level == v.level) {
        same_level_slices = true;
        down = &u;
        other = &v;
    } else if (u.level > v.level) {
        down = &u;
        other = &v;
    } else {
        down = &v;
        other = &u;
    }
    auto key = canon_key(u, v);
    if (use_table && same_level_slices) {
        auto it = table_.find(key);
        if (it != table_.end()) return it->second;
    }
    auto mit = memo.find(key);
    if (mit != memo.end()) return mit->second;
    memo[key] = false;  // guard; descents strictly shrink subtrees
    std::vector<CanonNode> kids;
    canon_nodes_slice(down->slice, kids);
    bool res = false;
    for (const auto& kd : kids) {
        if (canon_intersect(kd, *other, memo, use_table)) {
            res = true;
            break;
        }
    }
    memo[key] = res;
    if (use_table && same_level_slices) {
        table_[key] = res;
        ++lazy_fills_;
    }
    return res;
}

bool PathletStore::intersects(const Part& p1, const Part& p2) {
    if (p1.empty() || p2.empty()) return false;
    std::vector<CanonNode> c1, c2;
    canon_nodes(p1, c1);
    canon_nodes(p2, c2);
    std::map<std::array<int64_t, 8>, bool> memo;
    for (const auto& u : c1)
        for (const auto& v : c2)
            if (canon_intersect(u, v, memo, true)) return true;
    return false;
}

bool PathletStore::find_edge_pos(const Slice& s, const MatchEdge& e, int& pos) const {
    if (s.empty()) return false;
    const MesTree& t = *s.src;
    const PtI& pa = ctx_.H->grid_a(e.a);
    const PtI& pb = ctx_.H->grid_b(e.b);
    for (size_t i = 0; i < t.kids.size(); ++i) {
        int kb = t.prefix[i];
        int ke = kb + t.kids[i].m - 1;
        if (ke < s.lo || kb > s.hi) continue;
        const TreeChild& ch = t.kids[i];
        if (ch.is_leaf) {
            if (ch.edge == e) {
                pos = kb;
                return true;
            }
            continue;
        }
        int cell = ch.slice.src->cell_idx;
        if (cell >= 0 &&
            (!ctx_.H->box_contains_point(cell, pa) || !ctx_.H->box_contains_point(cell, pb)))
            continue;
        Slice sub{ch.slice.src, ch.slice.lo + std::max(s.lo, kb) - kb,
                  ch.slice.lo + std::min(s.hi, ke) - kb};
        int sub_pos = 0;
        if (find_edge_pos(sub, e, sub_pos)) {
            pos = kb + (sub_pos - sub.lo) + (std::max(s.lo, kb) - kb);
            return true;
        }
    }
    return false;
}

PathletStore::LceResult PathletStore::last_common_edge(const Part& p1, const Part& p2) {
    LceResult res;
    if (p1.empty() || p2.empty()) return res;
    if (!intersects(p1, p2)) return res;
    // walk down p1 right-to-left over canonical nodes keeping track of the
    // absolute position offset of each node
    struct Pos {
        CanonNode node;
        int start_rel;  // position of node's first edge relative to p1
    };
    std::map<std::array<int64_t, 8>, bool> memo;
    std::vector<CanonNode> top;
    canon_nodes(p1, top);
    std::vector<Pos> frontier;
    {
        int off = 0;
        for (const auto& u : top) {
            int len = u.is_leaf ? 1 : u.slice.len();
            frontier.push_back({u, off});
            off += len;
        }
    }
    std::vector<CanonNode> c2;
    canon_nodes(p2, c2);
    auto node_intersects_p2 = [&](const CanonNode& u) {
        for (const auto& v : c2)
            if (canon_intersect(u, v, memo, true)) return true;
        return false;
    };

    // descend: pick the rightmost frontier node that intersects p2; if leaf,
    // done; else replace by its children
    int guard = 0;
    for (;;) {
        if (++guard > 1 << 20) throw std::runtime_error("last_common_edge: descent overflow");
        int pick = -1;
        for (int i = int(frontier.size()) - 1; i >= 0; --i) {
            if (node_intersects_p2(frontier[i].node)) {
                pick = i;
                break;
            }
        }
        if (pick < 0) return res;  // cannot happen if intersects() was true
        const Pos chosen = frontier[pick];
        if (chosen.node.is_leaf) {
            res.found = true;
            res.rel1 = chosen.start_rel;
            // locate the copy in p2
            if (p2.is_leaf) {
                res.rel2 = 0;
            } else {
                int pos2 = 0;
                if (!find_edge_pos(p2.slice, chosen.node.edge, pos2))
                    throw std::runtime_error("last_common_edge: copy not found");
                res.rel2 = pos2 - p2.slice.lo;
            }
            return res;
        }
        std::vector<CanonNode> kids;
        canon_nodes_slice(chosen.node.slice, kids);
        std::vector<Pos> next(frontier.begin(), frontier.begin() + pick);
        int off = chosen.start_rel;
        for (const auto& k : kids) {
            next.push_back({k, off});
            off += k.is_leaf ? 1 : k.slice.len();
        }
        frontier = std::move(next);
    }
}

double PathletStore::adj_cost(const CompactPath& cp) const {
    double adj = 0.0;
    int prev_a = -1, first_b = -1, last_a = -1;
    bool any = false;
    for (const auto& p : cp.parts) {
        if (p.empty()) continue;
        SliceAgg a = agg(p);
        if (!any) {
            first_b = a.first_b;
            any = true;
        } else {
            adj += ctx_.adj_nm(prev_a, a.first_b);
        }
        adj += a.adj;
        prev_a = a.last_a;
        last_a = a.last_a;
    }
    if (!any) {
        if (cp.tip_a < 0 || cp.tip_b < 0)
            throw std::invalid_argument("adj_cost: empty MES without tips");
        return ctx_.adj_nm(cp.tip_a, cp.tip_b);
    }
    if (cp.cycle) {
        if (cp.tip_a >= 0 || cp.tip_b >= 0)
            throw std::invalid_argument("adj_cost: cycle with tips");
        adj += ctx_.adj_nm(last_a, first_b);
        return adj;
    }
    if (cp.tip_a >= 0) adj += ctx_.adj_nm(cp.tip_a, first_b);
    if (cp.tip_b >= 0) adj += ctx_.adj_nm(last_a, cp.tip_b);
    return adj;
}

void PathletStore::report_part(const Part& p, std::vector<MatchEdge>& out) const {
    if (p.empty()) return;
    if (p.is_leaf) {
        out.push_back(p.edge);
        return;
    }
    const Slice& s = p.slice;
    const MesTree& t = *s.src;
    for (size_t i = 0; i < t.kids.size(); ++i) {
        int kb = t.prefix[i];
        int ke = kb + t.kids[i].m - 1;
        if (ke < s.lo || kb > s.hi) continue;
        const TreeChild& ch = t.kids[i];
        if (ch.is_leaf) {
            out.push_back(ch.edge);
        } else {
            Part sub;
            sub.slice = Slice{ch.slice.src, ch.slice.lo + std::max(s.lo, kb) - kb,
                              ch.slice.lo + std::min(s.hi, ke) - kb};
            report_part(sub, out);
        }
    }
}

std::vector<ResidualEdge> PathletStore::report(const CompactPath& cp) const {
    std::vector<MatchEdge> mes;
    for (const auto& p : cp.parts) report_part(p, mes);
    std::vector<ResidualEdge> out;
    if (mes.empty()) {
        if (cp.tip_a < 0 || cp.tip_b < 0)
            throw std::invalid_argument("report: empty MES without tips");
        out.push_back({cp.tip_a, cp.tip_b, false});
        return out;
    }
    if (cp.tip_a >= 0) out.push_back({cp.tip_a, mes.front().b, false});
    for (size_t i = 0; i < mes.size(); ++i) {
        out.push_back({mes[i].a, mes[i].b, true});
        if (i + 1 < mes.size()) out.push_back({mes[i].a, mes[i + 1].b, false});
    }
    if (cp.tip_b >= 0) out.push_back({mes.back().a, cp.tip_b, false});
    if (cp.cycle) out.push_back({mes.back().a, mes.front().b, false});
    return out;
}

void PathletStore::update_tables_for_new_trees() {
    if (!eager_tables_) {
        fresh_.clear();
        return;
    }
    std::vector<TreePtr> fresh;
    for (auto& w : fresh_)
        if (auto t = w.lock()) fresh.push_back(std::move(t));
    fresh_.clear();
    const Hierarchy& H = *ctx_.H;
    size_t work = 0;
    constexpr size_t kWorkCap = 1 << 20;
    for (const auto& t : fresh) {
        for (const auto& ch : t->kids) {
            if (ch.is_leaf) continue;
            const TreePtr& src = ch.slice.src;
            CanonNode u;
            u.slice = ch.slice;
            u.cell_idx = src->cell_idx;
            u.level = src->level;
            if (u.cell_idx < 0) continue;
            // partner trees at cells of the same level whose boxes meet
            for (int sib : H.sibling_cells(u.cell_idx)) {
                auto bit = by_cell_.find(sib);
                if (bit == by_cell_.end()) continue;
                for (uint64_t id : bit->second) {
                    auto rit = registry_.find(id);
                    if (rit == registry_.end()) continue;
                    TreePtr other = rit->second.tree.lock();
                    if (!other || other->level != src->level) continue;
                    for (auto [lo, hi] : rit->second.slices) {
                        CanonNode v;
                        v.slice = Slice{other, lo, hi};
                        v.cell_idx = other->cell_idx;
                        v.level = other->level;
                        auto key = canon_key(u, v);
                        if (table_.count(key)) continue;
                        std::map<std::array<int64_t, 8>, bool> memo;
                        table_[key] = canon_intersect(u, v, memo, true);
                        if (++work > kWorkCap) return;  // lazy fill covers the rest
                    }
                }
            }
        }
    }
}

void PathletStore::sweep() {
    for (auto it = registry_.begin(); it != registry_.end();) {
        if (it->second.tree.expired()) {
            if (it->second.cell_idx >= 0) {
                auto& lst = by_cell_[it->second.cell_idx];
                lst.erase(std::remove(lst.begin(), lst.end(), it->first), lst.end());
            }
            it = registry_.erase(it);
        } else {
            ++it;
        }
    }
    for (auto it = table_.begin(); it != table_.end();) {
        auto alive = [&](int64_t id) {
            if (id < 0) return true;  // leaf code
            auto rit = registry_.find(uint64_t(id));
            return rit != registry_.end() && !rit->second.tree.expired();
        };
        if (!alive((*it).first[0]) || !alive((*it).first[4]))
            it = table_.erase(it);
        else
            ++it;
    }
}

}  // namespace geomatch
