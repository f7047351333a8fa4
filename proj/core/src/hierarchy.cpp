#include "geomatch/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geomatch {

PtI Hierarchy::cell_anchor(const PtI& gp, int level, int family) const {
    int64_t L = cell_side(level);
    int64_t half = L >> 1;
    PtI a{};
    for (int i = 0; i < d_; ++i) {
        int64_t s = (family >> i) & 1 ? half : 0;
        a[i] = floordiv(gp[i] - s, L) * L + s;
    }
    return a;
}

PtI Hierarchy::subcell_of(const PtI& gp, int level) const {
    int64_t S = subcell_side(level);
    PtI u{};
    for (int i = 0; i < d_; ++i) u[i] = floordiv(gp[i], S);
    return u;
}

namespace {
// true iff every cell (bucketed point group) stays within `cap` clusters
// when subdivided by subcells of side `sub_size`
bool clusters_within_cap(const std::map<PtI, std::vector<std::pair<uint8_t, const PtI*>>>& cells,
                         int d, int64_t sub_size, int cap) {
    std::set<std::pair<uint8_t, PtI>> occ;
    for (const auto& [anchor, pts] : cells) {
        if (int(pts.size()) <= cap) continue;  // occupancy bounded by points
        occ.clear();
        for (auto [color, g] : pts) {
            PtI sub{};
            for (int i = 0; i < d; ++i) sub[i] = floordiv((*g)[i], sub_size);
            occ.insert({color, sub});
            if (int(occ.size()) > cap) return false;
        }
    }
    return true;
}
}  // namespace

Hierarchy::Hierarchy(const ConditionedInstance& inst, const DerivedParams& params)
    : inst_(&inst), params_(params), d_(inst.d) {
    families_ = 1 << d_;
    // scale by 2^k, offset +1: keeps the level-0 half shift and the
    // fractional subcell grids integral, and puts points strictly off cell
    // boundaries at every level
    double need = 16.0 * std::sqrt(double(d_)) / params_.lambda;
    k_ = 1;
    while ((double((int64_t(1) << k_)) < need)) ++k_;
    if (k_ < params_.tau + 2) k_ = params_.tau + 2;

    auto to_grid = [&](const PtI& p) {
        PtI g{};
        for (int i = 0; i < d_; ++i) g[i] = (p[i] << k_) + 1;
        return g;
    };
    ga_.resize(inst.a.size());
    gb_.resize(inst.b.size());
    for (size_t i = 0; i < inst.a.size(); ++i) ga_[i] = to_grid(inst.a[i]);
    for (size_t i = 0; i < inst.b.size(); ++i) gb_[i] = to_grid(inst.b[i]);

    // height: smallest level at which one cell of some family contains every
    // point (the formula height is truncated/extended to containment, which
    // is what the queue needs to never run dry)
    PtI lo = ga_.empty() ? (gb_.empty() ? PtI{} : gb_[0]) : ga_[0];
    PtI hi = lo;
    for (auto* v : {&ga_, &gb_})
        for (const auto& g : *v)
            for (int i = 0; i < d_; ++i) {
                lo[i] = std::min(lo[i], g[i]);
                hi[i] = std::max(hi[i], g[i]);
            }
    // per-level subcell offsets/penalties must exist before cell_anchor use;
    // start from the formula value and coarsen crowded levels below
    h_ = 1;
    tau_.assign(64, std::max(1, params_.tau));
    lambda_.assign(64, params_.lambda);
    for (;;) {
        bool contained = false;
        for (int f = 0; f < families_ && !contained; ++f)
            contained = cell_anchor(lo, h_, f) == cell_anchor(hi, h_, f);
        if (contained) break;
        ++h_;
        if (h_ > 60) throw std::overflow_error("hierarchy height overflow");
    }
    tau_.assign(size_t(h_) + 1, std::max(1, params_.tau));
    lambda_.assign(size_t(h_) + 1, params_.lambda);
    double sd = std::sqrt(double(d_));
    for (int level = 0; level <= h_; ++level) {
        int t = std::max(1, params_.tau);
        if (level > 0) t = std::min(t, tau_[size_t(level - 1)] + 1);
        if (params_.cluster_cap > 0 &&
            int64_t(ga_.size() + gb_.size()) > params_.cluster_cap) {
            int64_t L = cell_side(level);
            std::map<PtI, std::vector<std::pair<uint8_t, const PtI*>>> cells;
            for (int f = 0; f < families_; ++f)
                for (int color = 0; color < 2; ++color) {
                    const auto& pts = color ? gb_ : ga_;
                    for (const auto& g : pts) {
                        PtI anchor{};
                        for (int i = 0; i < d_; ++i) {
                            int64_t s = (f >> i) & 1 ? L >> 1 : 0;
                            anchor[i] = floordiv(g[i] - s, L) * L + s;
                        }
                        cells[anchor].push_back({uint8_t(color), &g});
                    }
                }
            while (t > 1) {
                int64_t S = int64_t(1) << (level - t + k_);
                if (clusters_within_cap(cells, d_, S, params_.cluster_cap)) break;
                --t;
            }
        }
        tau_[size_t(level)] = t;
        lambda_[size_t(level)] =
            std::max(params_.lambda, 4.0 * sd / double(int64_t(1) << t));
    }

    by_level_.resize(size_t(h_) + 1);
    members_[0].assign(ga_.size(), {});
    members_[1].assign(gb_.size(), {});
    for (auto& m : members_[0]) m.assign(size_t(h_ + 1) * families_, {});
    for (auto& m : members_[1]) m.assign(size_t(h_ + 1) * families_, {});

    for (int level = 0; level <= h_; ++level) {
        // collect cell anchors with occupants across all shift families
        std::map<PtI, std::vector<std::pair<uint8_t, int>>> groups;
        for (int f = 0; f < families_; ++f) {
            for (size_t i = 0; i < ga_.size(); ++i)
                groups[cell_anchor(ga_[i], level, f)].push_back({0, int(i)});
            for (size_t i = 0; i < gb_.size(); ++i)
                groups[cell_anchor(gb_[i], level, f)].push_back({1, int(i)});
        }
        for (auto& [anchor, occ] : groups) {
            // dedupe points that landed here from multiple families
            std::sort(occ.begin(), occ.end());
            occ.erase(std::unique(occ.begin(), occ.end()), occ.end());
            Cell c;
            c.level = level;
            c.anchor = anchor;
            std::map<std::pair<uint8_t, PtI>, std::vector<int>> bysub;
            for (auto [color, id] : occ)
                bysub[{color, subcell_of(grid_pt(color, id), level)}].push_back(id);
            for (auto& [key, ids] : bysub) {
                Cluster cl;
                cl.color = key.first;
                cl.sub = key.second;
                std::sort(ids.begin(), ids.end());
                cl.pts = ids;
                cl.free.insert(ids.begin(), ids.end());
                if (cl.color == 0) ++c.n_a;
                c.clusters.push_back(std::move(cl));
            }
            int idx = int(cells_.size());
            cells_.push_back(std::move(c));
            by_level_[level].push_back(idx);
            index_[{level, anchor}] = idx;
        }
    }

    // memberships: recompute the containing cell per (point, level, family)
    for (int level = 0; level <= h_; ++level) {
        for (int f = 0; f < families_; ++f) {
            for (int color = 0; color < 2; ++color) {
                auto& pts = color ? gb_ : ga_;
                for (size_t i = 0; i < pts.size(); ++i) {
                    int ci = index_.at({level, cell_anchor(pts[i], level, f)});
                    Member m;
                    m.cell = ci;
                    m.cluster = cluster_of_sub(ci, uint8_t(color),
                                               subcell_of(pts[i], level));
                    members_[color][i][size_t(level) * families_ + f] = m;
                }
            }
        }
    }

    // children: 3^d candidate anchors at level-1 spacing
    for (auto& lst : by_level_) {
        for (int ci : lst) {
            Cell& c = cells_[ci];
            if (c.level == 0) continue;
            int64_t half = cell_side(c.level) >> 1;
            int combos = 1;
            for (int i = 0; i < d_; ++i) combos *= 3;
            for (int t = 0; t < combos; ++t) {
                PtI a = c.anchor;
                int rem = t;
                for (int i = 0; i < d_; ++i) {
                    a[i] += (rem % 3) * (half >> 1);
                    rem /= 3;
                }
                auto it = index_.find({c.level - 1, a});
                if (it != index_.end()) {
                    c.children.push_back(it->second);
                    cells_[it->second].parents.push_back(ci);
                }
            }
            std::sort(c.children.begin(), c.children.end(), [&](int x, int y) {
                return cells_[x].anchor < cells_[y].anchor;
            });
        }
    }
}

int Hierarchy::cluster_of_sub(int cell_idx, uint8_t color, const PtI& sub) const {
    const Cell& c = cells_[cell_idx];
    int lo = color == 0 ? 0 : c.n_a;
    int hi = color == 0 ? c.n_a : c.s();
    // clusters are ordered by (color, sub)
    auto first = c.clusters.begin() + lo;
    auto last = c.clusters.begin() + hi;
    auto it = std::lower_bound(first, last, sub,
                               [](const Cluster& cl, const PtI& key) { return cl.sub < key; });
    if (it != last && it->sub == sub) return int(it - c.clusters.begin());
    return -1;
}

int Hierarchy::cluster_of_point(int cell_idx, uint8_t color, int id) const {
    const Cell& c = cells_[cell_idx];
    return cluster_of_sub(cell_idx, color, subcell_of(grid_pt(color, id), c.level));
}

void Hierarchy::cells_of_point(uint8_t color, int id, std::vector<int>& out) const {
    const auto& mem = members_[color][size_t(id)];
    for (const auto& m : mem) out.push_back(m.cell);
}

std::set<int> Hierarchy::affected_cells(
    const std::vector<std::pair<uint8_t, int>>& pts) const {
    std::set<int> out;
    for (auto [color, id] : pts) {
        const auto& mem = members_[color][size_t(id)];
        for (const auto& m : mem) out.insert(m.cell);
    }
    return out;
}

int Hierarchy::common_cell(const PtI& p, const PtI& q, int level, int family) const {
    PtI ap = cell_anchor(p, level, family);
    if (ap != cell_anchor(q, level, family)) return -1;
    auto it = index_.find({level, ap});
    return it == index_.end() ? -1 : it->second;
}

int Hierarchy::smallest_common_cell(const PtI& p, const PtI& q) const {
    for (int level = 0; level <= h_; ++level)
        for (int f = 0; f < families_; ++f) {
            int c = common_cell(p, q, level, f);
            if (c >= 0) return c;
        }
    return -1;
}

int Hierarchy::find_cell(int level, const PtI& anchor) const {
    auto it = index_.find({level, anchor});
    return it == index_.end() ? -1 : it->second;
}

void Hierarchy::set_point_free(uint8_t color, int id, bool free_now) {
    const auto& mem = members_[color][size_t(id)];
    for (const auto& m : mem) {
        Cluster& cl = cells_[m.cell].clusters[m.cluster];
        if (free_now)
            cl.free.insert(id);
        else
            cl.free.erase(id);
    }
}

bool Hierarchy::boxes_intersect(int cell1, int cell2) const {
    const Cell& x = cells_[cell1];
    const Cell& y = cells_[cell2];
    int64_t lx = cell_side(x.level), ly = cell_side(y.level);
    for (int i = 0; i < d_; ++i) {
        if (x.anchor[i] + lx <= y.anchor[i]) return false;
        if (y.anchor[i] + ly <= x.anchor[i]) return false;
    }
    return true;
}

bool Hierarchy::box_contains_point(int cell_idx, const PtI& gp) const {
    const Cell& c = cells_[cell_idx];
    int64_t L = cell_side(c.level);
    for (int i = 0; i < d_; ++i)
        if (gp[i] < c.anchor[i] || gp[i] >= c.anchor[i] + L) return false;
    return true;
}

std::vector<int> Hierarchy::sibling_cells(int cell_idx) const {
    const Cell& c = cells_[cell_idx];
    int64_t half = cell_side(c.level) >> 1;
    std::vector<int> out;
    int combos = 1;
    for (int i = 0; i < d_; ++i) combos *= 3;
    for (int t = 0; t < combos; ++t) {
        PtI a = c.anchor;
        int rem = t;
        for (int i = 0; i < d_; ++i) {
            a[i] += ((rem % 3) - 1) * half;
            rem /= 3;
        }
        auto it = index_.find({c.level, a});
        if (it != index_.end()) out.push_back(it->second);
    }
    return out;
}

}  // namespace geomatch
