#include "geomatch/matcher.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <sstream>

namespace geomatch {

namespace {
inline uint64_t mix(uint64_t h, uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}
struct PhaseTimer {
    double* acc;
    std::chrono::steady_clock::time_point t0;
    explicit PhaseTimer(double* a) : acc(a), t0(std::chrono::steady_clock::now()) {}
    ~PhaseTimer() {
        *acc += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};
}  // namespace

bool Engine::XiOrder::operator()(int a, int b) const {
    const Cell& ca = eng->H_->cell(a);
    const Cell& cb = eng->H_->cell(b);
    if (ca.level != cb.level) return ca.level < cb.level;
    int fa = eng->cell_family(a), fb = eng->cell_family(b);
    if (fa != fb) return fa < fb;
    if (ca.anchor != cb.anchor) return ca.anchor < cb.anchor;
    return a < b;
}

Engine::Engine(Hierarchy& hier, const ConstantsConfig& cfg, Norm norm)
    : H_(&hier),
      cfg_(cfg),
      P_(hier.params()),
      norm_(norm),
      ctx_{&hier, hier.params().adj_coeff, norm},
      store_(ctx_),
      xi_(XiOrder{this}) {
    cs_.resize(size_t(H_->num_cells()));
    n_ = H_->inst().n;
    match_a_.assign(size_t(std::max(0, n_)), -1);
    match_b_.assign(size_t(std::max(0, n_)), -1);
    len_bound_grid_ = 27.0 * std::sqrt(double(P_.d)) * double(n_) / P_.eps *
                      double(int64_t(1) << H_->k_shift());
    // When beta brackets the optimum, P3 bounds the conditioned optimum by
    // 9*sqrt(d)*n/eps and every intermediate matching costs at most a
    // (1+eps/2) factor more; exceeding this certifies an off-bracket guess.
    cost_bound_grid_ = (1.0 + P_.eps / 2.0) * 9.0 * std::sqrt(double(P_.d)) * double(n_) /
                       P_.eps * double(int64_t(1) << H_->k_shift());
}

int Engine::cell_family(int idx) const {
    const Cell& c = H_->cell(idx);
    int64_t half = H_->cell_side(c.level) >> 1;
    int fam = 0;
    for (int i = 0; i < H_->dim(); ++i) {
        int64_t r = c.anchor[i] % (half * 2);
        if (r < 0) r += half * 2;
        if (r != 0) fam |= (1 << i);
    }
    return fam;
}

bool Engine::cluster_unsat(int cell_idx, int cluster_idx) const {
    return H_->cell(cell_idx).clusters[size_t(cluster_idx)].unsaturated();
}

// Geometric test plus candidate (child, cx, cy) certificates in tie order.
// Returns true iff some child cell contains both subcells (internal arc).
bool Engine::internal_candidates(int cell_idx, bool abdir, int x, int y,
                                 std::vector<Certificate>& out) const {
    const Cell& c = H_->cell(cell_idx);
    int d = H_->dim();
    const Cluster& ca = c.clusters[size_t(x)];
    const Cluster& cb = c.clusters[size_t(c.n_a + y)];
    int64_t S = H_->subcell_side(c.level);
    bool internal = false;
    const CellState& pcs = cs_[size_t(cell_idx)];
    for (size_t ord = 0; ord < c.children.size(); ++ord) {
        int child = c.children[ord];
        const Cell& ch = H_->cell(child);
        int64_t L = H_->cell_side(ch.level);
        auto contains = [&](const PtI& sub) {
            for (int i = 0; i < d; ++i) {
                int64_t lo = sub[i] * S;
                if (lo < ch.anchor[i] || lo + S > ch.anchor[i] + L) return false;
            }
            return true;
        };
        if (!contains(ca.sub) || !contains(cb.sub)) continue;
        internal = true;
        if (ord >= pcs.childmaps.size()) continue;
        const CellState::ChildMap& cm = pcs.childmaps[ord];
        if (cm.a_by_x.empty()) continue;  // single-color child
        for (int16_t cx : cm.a_by_x[size_t(x)]) {
            for (int16_t cy : cm.b_by_y[size_t(y)]) {
                Certificate cert;
                cert.child_cell = child;
                cert.cx = cx;
                cert.cy = cy;
                out.push_back(cert);
                (void)abdir;
            }
        }
    }
    return internal;
}

double Engine::weigh_bridge(int cell_idx, bool abdir, int x, int y) const {
    const Cell& c = H_->cell(cell_idx);
    const CellState& cs = cs_[size_t(cell_idx)];
    const Cluster& ca = c.clusters[size_t(x)];
    const Cluster& cb = c.clusters[size_t(c.n_a + y)];
    int d = H_->dim();
    PtD za{}, zb{};
    for (int i = 0; i < d; ++i) {
        za[i] = H_->subcell_center(ca.sub, c.level, i);
        zb[i] = H_->subcell_center(cb.sub, c.level, i);
    }
    double center_dist = dist(za, zb, d, norm_);
    double pen = H_->lell(c.level);
    auto mit = cs.medges.find({int16_t(x), int16_t(y)});
    size_t matched = mit == cs.medges.end() ? 0 : mit->second.size();
    if (abdir) {
        size_t total = ca.pts.size() * cb.pts.size();
        return total > matched ? center_dist + pen : kInfW;
    }
    return matched > 0 ? -center_dist + pen : kInfW;
}

double Engine::weigh_internal(int cell_idx, bool abdir, int x, int y, Certificate& cert) const {
    std::vector<Certificate> cands;
    internal_candidates(cell_idx, abdir, x, y, cands);
    double best = kInfW;
    cert = Certificate{};
    double pen = H_->lell(H_->cell(cell_idx).level);
    for (const Certificate& cd : cands) {
        const CellState& ccs = cs_[size_t(cd.child_cell)];
        const PairExp* pe;
        if (abdir)
            pe = &ccs.exp_ab[size_t(cd.cx) * ccs.sB + cd.cy];
        else
            pe = &ccs.exp_ba[size_t(cd.cy) * ccs.sA + cd.cx];
        if (!pe->exists) continue;
        double v = pe->adj_path + pen;
        if (v < best) {
            best = v;
            cert = cd;
        }
    }
    return best;
}

void Engine::reweigh_arc(int cell_idx, bool abdir, int x, int y, bool& wchanged) {
    CellState& cs = cs_[size_t(cell_idx)];
    size_t idx = abdir ? size_t(x) * cs.sB + y : size_t(y) * cs.sA + x;
    Arc& arc = abdir ? cs.ab[idx] : cs.ba[idx];
    double old = arc.w;
    std::vector<Certificate> cands;
    bool internal = internal_candidates(cell_idx, abdir, x, y, cands);
    if (internal) {
        arc.kind = ArcKind::Internal;
        arc.w = weigh_internal(cell_idx, abdir, x, y, arc.cert);
    } else {
        arc.kind = abdir ? ArcKind::BridgeNm : ArcKind::BridgeM;
        arc.cert = Certificate{};
        arc.w = weigh_bridge(cell_idx, abdir, x, y);
    }
    (abdir ? cs.asig_ab[idx] : cs.asig_ba[idx]) = arc_sig(cell_idx, abdir, x, y);
    if (arc.w != old) wchanged = true;
}

bool Engine::choose_nm_pair(int cell_idx, int x, int y, int& aid, int& bid) const {
    const Cell& c = H_->cell(cell_idx);
    const Cluster& ca = c.clusters[size_t(x)];
    const Cluster& cb = c.clusters[size_t(c.n_a + y)];
    // preference order per cluster: free points ascending, then the rest;
    // the first a is blocked by at most one b (its own partner)
    int a0 = ca.free.empty() ? ca.pts.front() : *ca.free.begin();
    auto try_bs = [&](int a) {
        for (int b : cb.free) {
            if (match_a_[size_t(a)] != b) {
                aid = a;
                bid = b;
                return true;
            }
        }
        for (int b : cb.pts) {
            if (cb.free.count(b)) continue;
            if (match_a_[size_t(a)] != b) {
                aid = a;
                bid = b;
                return true;
            }
        }
        return false;
    };
    if (try_bs(a0)) return true;
    // every b is a0's partner: only possible when |B| == 1; take the next a
    int b0 = cb.free.empty() ? cb.pts.front() : *cb.free.begin();
    for (int a : ca.free) {
        if (match_a_[size_t(a)] != b0) {
            aid = a;
            bid = b0;
            return true;
        }
    }
    for (int a : ca.pts) {
        if (ca.free.count(a)) continue;
        if (match_a_[size_t(a)] != b0) {
            aid = a;
            bid = b0;
            return true;
        }
    }
    return false;
}

uint64_t Engine::arc_sig(int cell_idx, bool abdir, int x, int y) const {
    const CellState& cs = cs_[size_t(cell_idx)];
    const Arc& arc = abdir ? cs.ab[size_t(x) * cs.sB + y] : cs.ba[size_t(y) * cs.sA + x];
    uint64_t h = 1469598103934665603ULL;
    h = mix(h, uint64_t(abdir ? 11 : 13));
    if (arc.w == kInfW) return mix(h, 1);
    switch (arc.kind) {
        case ArcKind::BridgeNm: {
            int a = -1, b = -1;
            choose_nm_pair(cell_idx, x, y, a, b);
            h = mix(h, 2);
            h = mix(h, uint64_t(a));
            h = mix(h, uint64_t(b));
            break;
        }
        case ArcKind::BridgeM: {
            auto it = cs.medges.find({int16_t(x), int16_t(y)});
            assert(it != cs.medges.end() && !it->second.empty());
            auto [neglen, a, b] = *it->second.begin();
            h = mix(h, 3);
            h = mix(h, uint64_t(a));
            h = mix(h, uint64_t(b));
            break;
        }
        case ArcKind::Internal: {
            const CellState& ccs = cs_[size_t(arc.cert.child_cell)];
            const PairExp& pe = abdir ? ccs.exp_ab[size_t(arc.cert.cx) * ccs.sB + arc.cert.cy]
                                      : ccs.exp_ba[size_t(arc.cert.cy) * ccs.sA + arc.cert.cx];
            h = mix(h, 4);
            h = mix(h, pe.tree ? pe.tree->content : 5);
            h = mix(h, uint64_t(pe.tip_a));
            h = mix(h, uint64_t(pe.tip_b));
            break;
        }
    }
    return h;
}

ArcExpansion Engine::arc_expansion(int cell_idx, bool abdir, int x, int y) const {
    const Cell& c = H_->cell(cell_idx);
    const CellState& cs = cs_[size_t(cell_idx)];
    const Arc& arc = abdir ? cs.ab[size_t(x) * cs.sB + y] : cs.ba[size_t(y) * cs.sA + x];
    ArcExpansion ax;
    switch (arc.kind) {
        case ArcKind::BridgeNm: {
            ax.kind = ArcExpansion::NmEdge;
            bool ok = choose_nm_pair(cell_idx, x, y, ax.tip_a, ax.tip_b);
            assert(ok);
            (void)ok;
            break;
        }
        case ArcKind::BridgeM: {
            ax.kind = ArcExpansion::MEdge;
            auto it = cs.medges.find({int16_t(x), int16_t(y)});
            assert(it != cs.medges.end() && !it->second.empty());
            auto [neglen, a, b] = *it->second.begin();
            ax.edge = MatchEdge{a, b};
            ax.leaf_cell = cell_idx;
            ax.leaf_level = c.level;
            break;
        }
        case ArcKind::Internal: {
            ax.kind = ArcExpansion::Tree;
            const CellState& ccs = cs_[size_t(arc.cert.child_cell)];
            const PairExp& pe = abdir ? ccs.exp_ab[size_t(arc.cert.cx) * ccs.sB + arc.cert.cy]
                                      : ccs.exp_ba[size_t(arc.cert.cy) * ccs.sA + arc.cert.cx];
            assert(pe.exists);
            ax.tree = pe.tree;
            ax.tip_a = pe.tip_a;
            ax.tip_b = pe.tip_b;
            break;
        }
    }
    return ax;
}

std::vector<int> Engine::pair_path_nodes(const CellState& cs, int from, int to) const {
    std::vector<int> nodes;
    int s = cs.s();
    int cur = from;
    nodes.push_back(cur);
    int guard = 0;
    while (cur != to) {
        int16_t nxt = cs.succ[size_t(cur) * s + to];
        assert(nxt >= 0);
        cur = nxt;
        nodes.push_back(cur);
        if (++guard > s + 1) throw std::logic_error("pair_path_nodes: successor loop");
    }
    return nodes;
}

std::optional<std::vector<ResidualEdge>> Engine::refresh_pairs(
    int cell_idx, std::vector<std::tuple<bool, int, int>>& changed) {
    CellState& cs = cs_[size_t(cell_idx)];
    const Cell& c = H_->cell(cell_idx);
    int s = cs.s();
    double tol = 1e-9;
    // Cells without parents feed no internal arcs upstream; only their
    // candidate pairs (both clusters unsaturated, A->B) are ever consumed.
    bool candidates_only = c.parents.empty() && cfg_.audit == 0;
    for (int dir = 0; dir < 2; ++dir) {
        bool abdir = dir == 0;
        if (candidates_only && !abdir) continue;
        for (int x = 0; x < cs.sA; ++x) {
            if (candidates_only && !cluster_unsat(cell_idx, x)) continue;
            for (int y = 0; y < cs.sB; ++y) {
                if (candidates_only && !cluster_unsat(cell_idx, c.n_a + y)) continue;
                PairExp& pe = abdir ? cs.exp_ab[size_t(x) * cs.sB + y]
                                    : cs.exp_ba[size_t(y) * cs.sA + x];
                int u = abdir ? x : cs.sA + y;
                int v = abdir ? cs.sA + y : x;
                double dv = cs.dist[size_t(u) * s + v];
                if (dv == kInfW) {
                    if (pe.exists) {
                        pe = PairExp{};
                        changed.push_back({abdir, x, y});
                    }
                    continue;
                }
                ++stats_.pairs_walked;
                std::vector<int> nodes = pair_path_nodes(cs, u, v);
                uint64_t sig = 1099511628211ULL;
                for (size_t t = 0; t + 1 < nodes.size(); ++t) {
                    int nu = nodes[t], nv = nodes[t + 1];
                    bool hop_ab = nu < cs.sA;
                    int hx = hop_ab ? nu : nv;
                    int hy = hop_ab ? nv - cs.sA : nu - cs.sA;
                    sig = mix(sig, uint64_t(nu));
                    sig = mix(sig, hop_ab ? cs.asig_ab[size_t(hx) * cs.sB + hy]
                                          : cs.asig_ba[size_t(hy) * cs.sA + hx]);
                }
                sig = mix(sig, uint64_t(nodes.back()));
                if (pe.exists && pe.sig == sig) continue;
                ++stats_.pairs_rebuilt;
                PhaseTimer bt(&stats_.t_rebuild);
                // rebuild the expansion from the compressed path
                std::vector<ArcExpansion> arcs;
                for (size_t t = 0; t + 1 < nodes.size(); ++t) {
                    int nu = nodes[t], nv = nodes[t + 1];
                    bool hop_ab = nu < cs.sA;
                    int hx = hop_ab ? nu : nv;
                    int hy = hop_ab ? nv - cs.sA : nu - cs.sA;
                    arcs.push_back(arc_expansion(cell_idx, hop_ab, hx, hy));
                }
                ExpansionResult res = construct_expansion(store_, arcs, &stats_.simplify);
                if (res.aborted) {
                    cs.stable = false;
                    cs.apsp_valid = false;
                    cs.dirty_all = true;
                    return store_.report(res.reducing);
                }
                PairExp ne;
                ne.exists = true;
                ne.sig = sig;
                ne.tip_a = abdir ? res.tip_a : -1;
                ne.tip_b = abdir ? res.tip_b : -1;
                if (res.parts.empty()) {
                    assert(abdir && ne.tip_a >= 0 && ne.tip_b >= 0);
                    ne.tree = nullptr;
                    ne.adj_path = ctx_.adj_nm(ne.tip_a, ne.tip_b);
                } else {
                    ne.tree = store_.concatenate(res.parts, c.level, cell_idx);
                    CompactPath cp;
                    Part whole;
                    whole.slice = Slice{ne.tree, 0, ne.tree->m_total - 1};
                    cp.parts.push_back(whole);
                    cp.tip_a = ne.tip_a;
                    cp.tip_b = ne.tip_b;
                    ne.adj_path = store_.adj_cost(cp);
                }
                // value-identical rebuilds keep the old tree and do not
                // propagate to parents
                bool same_value = pe.exists && pe.tip_a == ne.tip_a && pe.tip_b == ne.tip_b &&
                                  pe.adj_path == ne.adj_path &&
                                  (pe.tree == nullptr) == (ne.tree == nullptr) &&
                                  (!pe.tree || pe.tree->content == ne.tree->content);
                if (same_value) {
                    pe.sig = sig;
                } else {
                    pe = ne;
                    changed.push_back({abdir, x, y});
                }
                if (cfg_.audit >= 1 && pe.adj_path > dv + tol * (1.0 + std::fabs(dv)))
                    ++stats_.expansion_violations;
            }
        }
    }
    return std::nullopt;
}

void Engine::notify_parents(int cell_idx, const std::vector<std::tuple<bool, int, int>>& changed) {
    if (changed.empty()) return;
    const Cell& c = H_->cell(cell_idx);
    for (int parent : c.parents) {
        CellState& ps = cs_[size_t(parent)];
        const Cell& pc = H_->cell(parent);
        if (pc.n_a == 0 || pc.n_a == pc.s()) continue;
        if (ps.sA == 0) continue;  // parent not yet built; dirty_all covers it
        int64_t Sc = H_->subcell_side(c.level);
        int64_t Sp = H_->subcell_side(pc.level);
        auto parent_cluster = [&](int abs_idx) {
            const Cluster& cl = c.clusters[size_t(abs_idx)];
            PtI psub{};
            for (int i = 0; i < H_->dim(); ++i) psub[i] = floordiv(cl.sub[i] * Sc, Sp);
            return H_->cluster_of_sub(parent, cl.color, psub);
        };
        for (auto [abdir, x, y] : changed) {
            int px = parent_cluster(x);
            int pyAbs = parent_cluster(c.n_a + y);
            if (px < 0 || pyAbs < 0) continue;
            int py = pyAbs - pc.n_a;
            if (abdir)
                ps.dirty_ab.insert({int16_t(px), int16_t(py)});
            else
                ps.dirty_ba.insert({int16_t(py), int16_t(px)});
        }
    }
}

// Candidate value of an unsaturated pair: the stored expansion with its tips
// retargeted to free points of the clusters (smallest free ids). Returns
// false if the pair has no expansion.
bool Engine::candidate_with_free_tips(int cell_idx, int x, int y, double& adj, int& tip_a,
                                      int& tip_b) const {
    const CellState& cs = cs_[size_t(cell_idx)];
    const Cell& c = H_->cell(cell_idx);
    const PairExp& pe = cs.exp_ab[size_t(x) * cs.sB + y];
    if (!pe.exists) return false;
    const Cluster& ca = c.clusters[size_t(x)];
    const Cluster& cb = c.clusters[size_t(c.n_a + y)];
    tip_a = *ca.free.begin();
    tip_b = *cb.free.begin();
    if (!pe.tree) {
        adj = ctx_.adj_nm(tip_a, tip_b);
        return true;
    }
    adj = pe.tree->adj_total + ctx_.adj_nm(tip_a, pe.tree->first_b) +
          ctx_.adj_nm(pe.tree->last_a, tip_b);
    return true;
}

void Engine::push_candidate(int cell_idx) {
    CellState& cs = cs_[size_t(cell_idx)];
    const Cell& c = H_->cell(cell_idx);
    ++cs.version;
    double best = kInfW;
    int bx = -1, by = -1;
    for (int x = 0; x < cs.sA; ++x) {
        if (!cluster_unsat(cell_idx, x)) continue;
        for (int y = 0; y < cs.sB; ++y) {
            if (!cluster_unsat(cell_idx, c.n_a + y)) continue;
            double adj;
            int ta, tb;
            if (!candidate_with_free_tips(cell_idx, x, y, adj, ta, tb)) continue;
            if (adj < best) {
                best = adj;
                bx = x;
                by = y;
            }
        }
    }
    if (bx >= 0) queue_.push(QEntry{best, cell_idx, bx, by, cs.version});
}

std::optional<std::vector<ResidualEdge>> Engine::expand_negative_cycle(
    int cell_idx, const std::vector<int>& nodes) {
    CellState& cs = cs_[size_t(cell_idx)];
    std::vector<ArcExpansion> arcs;
    int k = int(nodes.size());
    for (int t = 0; t < k; ++t) {
        int nu = nodes[size_t(t)], nv = nodes[size_t((t + 1) % k)];
        bool hop_ab = nu < cs.sA;
        int hx = hop_ab ? nu : nv;
        int hy = hop_ab ? nv - cs.sA : nu - cs.sA;
        arcs.push_back(arc_expansion(cell_idx, hop_ab, hx, hy));
    }
    CompactPath cyc;
    cyc.cycle = true;
    for (const auto& ax : arcs) {
        Part p;
        if (ax.kind == ArcExpansion::MEdge) {
            p.is_leaf = true;
            p.edge = ax.edge;
            p.leaf_cell = cell_idx;
            p.leaf_level = H_->cell(cell_idx).level;
        } else if (ax.kind == ArcExpansion::Tree && ax.tree && ax.tree->m_total > 0) {
            p.slice = Slice{ax.tree, 0, ax.tree->m_total - 1};
        } else {
            continue;  // pure non-matching arc contributes no MES content
        }
        cyc.parts.push_back(p);
    }
    CompactPath simple = simple_reducing_subcycle(store_, cyc, &stats_.simplify);
    return store_.report(simple);
}

std::optional<std::vector<ResidualEdge>> Engine::repair(int cell_idx) {
    CellState& cs = cs_[size_t(cell_idx)];
    const Cell& c = H_->cell(cell_idx);
    ++stats_.repairs;
    if (c.n_a == 0 || c.n_a == c.s()) {  // single color: trivially stable
        cs.stable = true;
        cs.dirty_all = false;
        cs.free_dirty = false;
        cs.free_changed.clear();
        return std::nullopt;
    }
    if (cs.sA == 0) {  // first touch: allocate
        cs.sA = c.n_a;
        cs.sB = c.s() - c.n_a;
        cs.ab.assign(size_t(cs.sA) * cs.sB, Arc{});
        cs.ba.assign(size_t(cs.sB) * cs.sA, Arc{});
        cs.exp_ab.assign(size_t(cs.sA) * cs.sB, PairExp{});
        cs.exp_ba.assign(size_t(cs.sB) * cs.sA, PairExp{});
        cs.asig_ab.assign(size_t(cs.sA) * cs.sB, 0);
        cs.asig_ba.assign(size_t(cs.sB) * cs.sA, 0);
        cs.childmaps.resize(c.children.size());
        int64_t S = H_->subcell_side(c.level);
        for (size_t ord = 0; ord < c.children.size(); ++ord) {
            const Cell& ch = H_->cell(c.children[ord]);
            if (ch.n_a == 0 || ch.n_a == ch.s()) continue;
            int64_t Sc = H_->subcell_side(ch.level);
            CellState::ChildMap& cm = cs.childmaps[ord];
            cm.a_by_x.resize(size_t(cs.sA));
            cm.b_by_y.resize(size_t(cs.sB));
            for (int ci = 0; ci < ch.s(); ++ci) {
                const Cluster& cl = ch.clusters[size_t(ci)];
                PtI psub{};
                for (int i = 0; i < H_->dim(); ++i) psub[i] = floordiv(cl.sub[i] * Sc, S);
                int pidx = H_->cluster_of_sub(cell_idx, cl.color, psub);
                if (pidx < 0) continue;
                if (cl.color == 0)
                    cm.a_by_x[size_t(pidx)].push_back(int16_t(ci));
                else
                    cm.b_by_y[size_t(pidx - c.n_a)].push_back(int16_t(ci - ch.n_a));
            }
        }
        cs.dirty_all = true;
    }
    if (!cs.any_dirty() && cs.stable) return std::nullopt;

    // (ii) arc weights: full or delta re-weigh
    bool wchanged = false;
    PhaseTimer* rt = new PhaseTimer(&stats_.t_reweigh);
    if (cs.dirty_all) {
        for (int x = 0; x < cs.sA; ++x)
            for (int y = 0; y < cs.sB; ++y) {
                reweigh_arc(cell_idx, true, x, y, wchanged);
                reweigh_arc(cell_idx, false, x, y, wchanged);
                stats_.arcs_reweighed += 2;
            }
    } else {
        stats_.arcs_reweighed += int64_t(cs.dirty_ab.size() + cs.dirty_ba.size());
        for (auto [x, y] : cs.dirty_ab) reweigh_arc(cell_idx, true, x, y, wchanged);
        for (auto [y, x] : cs.dirty_ba) reweigh_arc(cell_idx, false, x, y, wchanged);
        // free-set changes can move the chosen tips of non-matching bridge
        // arcs without touching weights: refresh those signatures
        for (int16_t cl : cs.free_changed) {
            if (cl < c.n_a) {
                int x = cl;
                for (int y = 0; y < cs.sB; ++y) {
                    size_t idx = size_t(x) * cs.sB + y;
                    if (cs.ab[idx].kind == ArcKind::BridgeNm && cs.ab[idx].w != kInfW)
                        cs.asig_ab[idx] = arc_sig(cell_idx, true, x, y);
                }
            } else {
                int y = cl - c.n_a;
                for (int x = 0; x < cs.sA; ++x) {
                    size_t idx = size_t(x) * cs.sB + y;
                    if (cs.ab[idx].kind == ArcKind::BridgeNm && cs.ab[idx].w != kInfW)
                        cs.asig_ab[idx] = arc_sig(cell_idx, true, x, y);
                }
            }
        }
    }

    delete rt;

    // (iii) APSP with negative-cycle branch
    if (wchanged || !cs.apsp_valid) {
        PhaseTimer ft(&stats_.t_fw);
        ++stats_.fw_runs;
        stats_.fw_ops += int64_t(cs.s()) * cs.s() * cs.s();
        if (!apsp_floyd_warshall(cs)) {
            std::vector<int> nodes = extract_negative_cycle(cs);
            assert(!nodes.empty());
            cs.stable = false;
            cs.apsp_valid = false;
            cs.dirty_all = true;
            cs.dirty_ab.clear();
            cs.dirty_ba.clear();
            cs.free_changed.clear();
            return expand_negative_cycle(cell_idx, nodes);
        }
    }

    // (iv) expansions for all pairs (reusing ones whose inputs are unchanged)
    std::vector<std::tuple<bool, int, int>> changed;
    std::optional<std::vector<ResidualEdge>> cyc;
    {
        PhaseTimer wt(&stats_.t_walk);
        cyc = refresh_pairs(cell_idx, changed);
    }
    if (cyc) {
        notify_parents(cell_idx, changed);  // rebuilt pairs stay rebuilt
        return cyc;
    }

    // (v) candidate pair + queue update
    PhaseTimer ct(&stats_.t_candidates);
    push_candidate(cell_idx);
    notify_parents(cell_idx, changed);
    cs.dirty_all = false;
    cs.free_dirty = false;
    cs.dirty_ab.clear();
    cs.dirty_ba.clear();
    cs.free_changed.clear();
    cs.stable = true;
    return std::nullopt;
}

double Engine::edge_len_grid(const ResidualEdge& e) const { return ctx_.cost(e.a, e.b); }

double Engine::path_len_grid(const std::vector<ResidualEdge>& edges) const {
    double s = 0.0;
    for (const auto& e : edges) s += edge_len_grid(e);
    return s;
}

void Engine::apply_delta(const std::vector<ResidualEdge>& edges) {
#ifndef NDEBUG
    {
        std::map<int, std::pair<int, int>> dega, degb;  // (m count, nm count)
        std::ostringstream os;
        bool bad = false;
        for (const auto& e : edges) {
            bool in_m = e.a >= 0 && match_a_[size_t(e.a)] == e.b;
            if (e.matching != in_m) bad = true;
            (e.matching ? dega[e.a].first : dega[e.a].second)++;
            (e.matching ? degb[e.b].first : degb[e.b].second)++;
        }
        for (auto& [p, d] : dega)
            if (d.first > 1 || d.second > 1) bad = true;
        for (auto& [p, d] : degb)
            if (d.first > 1 || d.second > 1) bad = true;
        // nm-only endpoints must be free
        for (auto& [p, d] : dega)
            if (d.first == 0 && d.second == 1 && match_a_[size_t(p)] >= 0) bad = true;
        for (auto& [p, d] : degb)
            if (d.first == 0 && d.second == 1 && match_b_[size_t(p)] >= 0) bad = true;
        if (bad) {
            os << "apply_delta: invalid alternating structure:";
            for (const auto& f : edges)
                os << " (" << f.a << "," << f.b << (f.matching ? ",m" : ",n") << ")";
            os << " | M:";
            for (auto& [p, d] : dega)
                os << " a" << p << "->" << match_a_[size_t(p)];
            for (auto& [p, d] : degb)
                os << " b" << p << "<-" << match_b_[size_t(p)];
            throw std::logic_error(os.str());
        }
    }
#endif
    std::vector<std::pair<int, int>> rem, add;
    std::set<int> ta, tb;
    for (const auto& e : edges) {
        (e.matching ? rem : add).push_back({e.a, e.b});
        ta.insert(e.a);
        tb.insert(e.b);
    }
    std::map<int, bool> pre_a, pre_b;
    for (int a : ta) pre_a[a] = match_a_[size_t(a)] < 0;
    for (int b : tb) pre_b[b] = match_b_[size_t(b)] < 0;

    auto route_medge = [&](int a, int b, bool insert) {
        double len = ctx_.cost(a, b);
        for (int level = 0; level <= H_->height(); ++level) {
            for (int fam = 0; fam < H_->families(); ++fam) {
                const auto& ma = H_->member(0, a, level, fam);
                const auto& mb = H_->member(1, b, level, fam);
                if (ma.cell != mb.cell) continue;
                CellState& cs = cs_[size_t(ma.cell)];
                const Cell& c = H_->cell(ma.cell);
                int x = ma.cluster;
                int y = mb.cluster - c.n_a;
                auto key = std::make_pair(int16_t(x), int16_t(y));
                if (insert)
                    cs.medges[key].insert({-len, a, b});
                else {
                    auto it = cs.medges.find(key);
                    if (it != cs.medges.end()) {
                        it->second.erase({-len, a, b});
                        if (it->second.empty()) cs.medges.erase(it);
                    }
                }
                cs.dirty_ab.insert({int16_t(x), int16_t(y)});
                cs.dirty_ba.insert({int16_t(y), int16_t(x)});
            }
        }
    };

    for (auto [a, b] : rem) {
        assert(match_a_[size_t(a)] == b);
        match_a_[size_t(a)] = -1;
        match_b_[size_t(b)] = -1;
        cost_grid_ -= ctx_.cost(a, b);
        --msize_;
        route_medge(a, b, false);
    }
    for (auto [a, b] : add) {
        assert(match_a_[size_t(a)] < 0 && match_b_[size_t(b)] < 0);
        match_a_[size_t(a)] = b;
        match_b_[size_t(b)] = a;
        cost_grid_ += ctx_.cost(a, b);
        ++msize_;
        route_medge(a, b, true);
    }
    auto route_free = [&](uint8_t color, int id, bool now_free) {
        H_->set_point_free(color, id, now_free);
        for (int level = 0; level <= H_->height(); ++level)
            for (int fam = 0; fam < H_->families(); ++fam) {
                const auto& mem = H_->member(color, id, level, fam);
                CellState& mcs = cs_[size_t(mem.cell)];
                mcs.free_dirty = true;
                mcs.free_changed.insert(int16_t(mem.cluster));
            }
    };
    for (int a : ta) {
        bool now = match_a_[size_t(a)] < 0;
        if (now != pre_a[a]) route_free(0, a, now);
    }
    for (int b : tb) {
        bool now = match_b_[size_t(b)] < 0;
        if (now != pre_b[b]) route_free(1, b, now);
    }
}

bool Engine::process_xi() {
    int last_level = -1;
    while (!xi_.empty()) {
        int cell_idx = *xi_.begin();
        xi_.erase(xi_.begin());
        int level = H_->cell(cell_idx).level;
        if (level != last_level) {
            store_.update_tables_for_new_trees();
            last_level = level;
        }
        auto cyc = repair(cell_idx);
        if (!cyc) continue;
        ++stats_.cancellations;
        if (stats_.cancellations > P_.cancel_budget) {
            stats_.budget_exhausted = true;
            stats_.abort_reason = "cancellation budget exhausted";
            return false;
        }
        stats_.cycle_edges += int64_t(cyc->size());
        if (path_len_grid(*cyc) > len_bound_grid_) {
            stats_.budget_exhausted = true;
            stats_.abort_reason = "cycle length bound exceeded";
            return false;
        }
        if (cfg_.audit >= 1) {
            double net = 0.0, len = 0.0;
            for (const auto& e : *cyc) {
                double cl = ctx_.cost(e.a, e.b);
                net += e.matching ? -cl : cl;
                len += cl;
            }
            if (!(net + P_.adj_coeff * len < 0.0)) ++stats_.cycle_violations;
        }
        apply_delta(*cyc);
        std::vector<std::pair<uint8_t, int>> pts;
        for (const auto& e : *cyc) {
            pts.push_back({0, e.a});
            pts.push_back({1, e.b});
        }
        for (int idx : H_->affected_cells(pts)) {
            const Cell& ac = H_->cell(idx);
            if (ac.n_a == 0 || ac.n_a == ac.s()) continue;
            xi_.insert(idx);
        }
        // the cycle lives inside this cell, which re-enters xi_ via the
        // affected set; repairs resume bottom-up
        last_level = -1;
    }
    store_.update_tables_for_new_trees();
    return true;
}

void Engine::initialize() {
    for (int i = 0; i < H_->num_cells(); ++i) {
        const Cell& c = H_->cell(i);
        if (c.n_a == 0 || c.n_a == c.s()) continue;
        xi_.insert(i);
    }
    if (!process_xi()) throw std::logic_error("initialize: unexpected cancellation");
    initialized_ = true;
}

bool Engine::find_path(int& cell_out, CompactPath& cp, double& key) {
    while (!queue_.empty()) {
        QEntry e = queue_.top();
        queue_.pop();
        const CellState& cs = cs_[size_t(e.cell)];
        if (e.version != cs.version || !cs.stable) continue;
        const PairExp& pe = cs.exp_ab[size_t(e.x) * cs.sB + e.y];
        if (!pe.exists) continue;
        const Cell& c = H_->cell(e.cell);
        if (!cluster_unsat(e.cell, e.x) || !cluster_unsat(e.cell, c.n_a + e.y)) continue;
        double adj;
        int ta, tb;
        if (!candidate_with_free_tips(e.cell, e.x, e.y, adj, ta, tb)) continue;
        cp = CompactPath{};
        if (pe.tree) {
            Part whole;
            whole.slice = Slice{pe.tree, 0, pe.tree->m_total - 1};
            cp.parts.push_back(whole);
        }
        cp.tip_a = ta;
        cp.tip_b = tb;
#ifndef NDEBUG
        if (match_a_[size_t(ta)] >= 0 || match_b_[size_t(tb)] >= 0)
            throw std::logic_error("find_path: retargeted tips not free");
#endif
        cell_out = e.cell;
        key = adj;
        return true;
    }
    return false;
}

MatcherResult Engine::run(std::ostream* trace, const RoundHook& hook) {
    MatcherResult out;
    if (!initialized_) initialize();
    int64_t last_cancels = 0;
    while (msize_ < n_) {
        int cell = -1;
        double key = 0.0;
        CompactPath cp;
        if (!find_path(cell, cp, key)) {
            stats_.budget_exhausted = true;
            stats_.abort_reason = "candidate queue empty with imperfect matching";
            out.stats = stats_;
            return out;
        }
        std::vector<ResidualEdge> edges = store_.report(cp);
        if (path_len_grid(edges) > len_bound_grid_) {
            stats_.budget_exhausted = true;
            stats_.abort_reason = "path length bound exceeded";
            out.stats = stats_;
            return out;
        }
        if (hook) hook(RoundInfo{stats_.rounds, match_a_, edges, key});
        apply_delta(edges);
        stats_.path_edges += int64_t(edges.size());
        std::vector<std::pair<uint8_t, int>> pts;
        for (const auto& e : edges) {
            pts.push_back({0, e.a});
            pts.push_back({1, e.b});
        }
        for (int idx : H_->affected_cells(pts)) {
            const Cell& ac = H_->cell(idx);
            if (ac.n_a == 0 || ac.n_a == ac.s()) continue;
            xi_.insert(idx);
        }
        if (!process_xi()) {
            out.stats = stats_;
            return out;
        }
        ++stats_.rounds;
        if (cost_grid_ > cost_bound_grid_) {
            stats_.budget_exhausted = true;
            stats_.abort_reason = "intermediate cost bound exceeded (off-bracket beta)";
            out.stats = stats_;
            return out;
        }
        if (trace) {
            double scale = double(int64_t(1) << H_->k_shift());
            int64_t cc = stats_.cancellations - last_cancels;
            last_cancels = stats_.cancellations;
            (*trace) << "round " << stats_.rounds << " | path_edges " << edges.size()
                     << " | cycles_canceled " << cc << " | cost " << (cost_grid_ / scale)
                     << "\n";
        }
        if (stats_.path_edges + stats_.cycle_edges > P_.step_budget) {
            stats_.budget_exhausted = true;
            stats_.abort_reason = "step budget exhausted";
            out.stats = stats_;
            return out;
        }
        if (store_.table_size() > (size_t(1) << 22)) store_.sweep();
    }
    stats_.cost_grid = cost_grid_;
    out.ok = true;
    out.match_a = match_a_;
    out.stats = stats_;
    return out;
}

std::string Engine::dump_cell(int idx) const {
    const Cell& c = H_->cell(idx);
    const CellState& cs = cs_[size_t(idx)];
    std::ostringstream os;
    auto arc_line = [&](bool abdir, int x, int y, const Arc& a) {
        os << c.level << " " << cell_family(idx) << " (";
        for (int i = 0; i < H_->dim(); ++i) os << (i ? "," : "") << c.anchor[i];
        os << ") | " << (abdir ? "A" : "B") << (abdir ? x : y) << " "
           << (abdir ? "B" : "A") << (abdir ? y : x) << " ";
        switch (a.kind) {
            case ArcKind::BridgeNm: os << "bridge-nonmatching"; break;
            case ArcKind::BridgeM: os << "bridge-matching"; break;
            case ArcKind::Internal: os << "internal"; break;
        }
        os << " " << a.w;
        if (a.kind == ArcKind::Internal && a.cert.child_cell >= 0) {
            const Cell& ch = H_->cell(a.cert.child_cell);
            os << " [" << ch.level << " (";
            for (int i = 0; i < H_->dim(); ++i) os << (i ? "," : "") << ch.anchor[i];
            os << ") " << a.cert.cx << " " << a.cert.cy << "]";
        }
        os << "\n";
    };
    for (int x = 0; x < cs.sA; ++x)
        for (int y = 0; y < cs.sB; ++y) arc_line(true, x, y, cs.ab[size_t(x) * cs.sB + y]);
    for (int y = 0; y < cs.sB; ++y)
        for (int x = 0; x < cs.sA; ++x) arc_line(false, x, y, cs.ba[size_t(y) * cs.sA + x]);
    return os.str();
}

}  // namespace geomatch
