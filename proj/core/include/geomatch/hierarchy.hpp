#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "geomatch/config.hpp"
#include "geomatch/geometry.hpp"
#include "geomatch/instance.hpp"

namespace geomatch {

// One A- or B-cluster: the same-color points of one subcell of a cell.
struct Cluster {
    uint8_t color = 0;  // 0 = A, 1 = B
    PtI sub{};          // subcell coordinates (global grid / subcell side)
    std::vector<int> pts;   // point ids, ascending
    std::set<int> free;     // currently free point ids
    bool unsaturated() const { return !free.empty(); }
};

struct Cell {
    int level = 0;  // paper level; side = 2^(level+k) grid units
    PtI anchor{};
    std::vector<Cluster> clusters;  // A-clusters first, then B, each by sub asc
    int n_a = 0;                    // number of A-clusters
    std::vector<int> children;      // cell indices, (level-1), anchor ascending
    std::vector<int> parents;       // cell indices at level+1 containing this cell
    int s() const { return int(clusters.size()); }
};

// Deterministic tree cover: 2^d shifted grid families per level, nonempty
// cells only, each cell partitioned into subcells of Grid_{level-tau}
// (clamped at the unit grid). All geometry is integer; conditioned lattice
// coordinates are scaled by 2^k and offset by +1 so that the level-0 half
// shift stays integral and points avoid all cell boundaries.
class Hierarchy {
  public:
    Hierarchy(const ConditionedInstance& inst, const DerivedParams& params);

    const ConditionedInstance& inst() const { return *inst_; }
    const DerivedParams& params() const { return params_; }
    int dim() const { return d_; }
    int k_shift() const { return k_; }
    int height() const { return h_; }
    int num_cells() const { return int(cells_.size()); }
    const Cell& cell(int idx) const { return cells_[idx]; }
    Cell& cell_mut(int idx) { return cells_[idx]; }
    const std::vector<int>& cells_at_level(int level) const { return by_level_[level]; }

    int64_t cell_side(int level) const { return int64_t(1) << (level + k_); }
    // Subcell grids below level tau are finer than the conditioned lattice;
    // the 2^k coordinate scaling keeps their side integral (k >= tau + 2).
    int64_t subcell_side(int level) const {
        return int64_t(1) << (level - tau_[size_t(level)] + k_);
    }
    int tau_at(int level) const { return tau_[size_t(level)]; }
    double lambda_at(int level) const { return lambda_[size_t(level)]; }
    double lell(int level) const {  // penalty term lambda_i * ell_i in grid units
        return lambda_[size_t(level)] * double(cell_side(level));
    }

    const PtI& grid_a(int id) const { return ga_[id]; }
    const PtI& grid_b(int id) const { return gb_[id]; }
    const PtI& grid_pt(uint8_t color, int id) const { return color ? gb_[id] : ga_[id]; }

    // membership of a point: one (cell, cluster) per level per shift family
    struct Member {
        int cell = -1;
        int cluster = -1;
    };
    const Member& member(uint8_t color, int id, int level, int family) const {
        return members_[color][size_t(id)][size_t(level) * families_ + family];
    }
    int families() const { return families_; }

    // all cells containing the point (every level, every family)
    void cells_of_point(uint8_t color, int id, std::vector<int>& out) const;
    std::set<int> affected_cells(const std::vector<std::pair<uint8_t, int>>& pts) const;

    // cells (their indices) containing both points at the given level, if any
    int common_cell(const PtI& p, const PtI& q, int level, int family) const;
    // minimum level cell containing both; ties by (family, anchor) ascending
    int smallest_common_cell(const PtI& p, const PtI& q) const;

    int find_cell(int level, const PtI& anchor) const;

    PtI cell_anchor(const PtI& gp, int level, int family) const;
    PtI subcell_of(const PtI& gp, int level) const;
    double subcell_center(const PtI& sub, int level, int dim_i) const {
        return (double(sub[dim_i]) + 0.5) * double(subcell_side(level));
    }

    // free-point bookkeeping (driven by the matcher as M changes)
    void set_point_free(uint8_t color, int id, bool free_now);

    // cluster index within a cell for a point or subcell, or -1
    int cluster_of_point(int cell_idx, uint8_t color, int id) const;
    int cluster_of_sub(int cell_idx, uint8_t color, const PtI& sub) const;

    bool boxes_intersect(int cell1, int cell2) const;
    bool box_contains_point(int cell_idx, const PtI& gp) const;
    // same-level cells whose boxes meet this one (includes the cell itself)
    std::vector<int> sibling_cells(int cell_idx) const;

  private:
    const ConditionedInstance* inst_;
    DerivedParams params_;
    int d_ = 0;
    int k_ = 1;
    int h_ = 1;
    int families_ = 1;
    std::vector<int> tau_;        // per-level subcell offset
    std::vector<double> lambda_;  // per-level penalty, >= 4*sqrt(d)/2^tau_i
    std::vector<PtI> ga_, gb_;
    std::vector<Cell> cells_;
    std::vector<std::vector<int>> by_level_;
    std::map<std::pair<int, PtI>, int> index_;  // (level, anchor) -> cell idx
    std::vector<std::vector<Member>> members_[2];
};

}  // namespace geomatch
