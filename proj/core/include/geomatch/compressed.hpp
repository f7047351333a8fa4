#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "geomatch/pathlet.hpp"

namespace geomatch {

inline constexpr double kInfW = std::numeric_limits<double>::infinity();

enum class ArcKind : uint8_t { BridgeNm = 0, BridgeM = 1, Internal = 2 };

// (child cell, child cluster x, child cluster y) realizing Eq. (3)'s minimum
struct Certificate {
    int child_cell = -1;
    int16_t cx = -1, cy = -1;
};

struct Arc {
    double w = kInfW;
    ArcKind kind = ArcKind::BridgeNm;
    Certificate cert;
};

// Cached expansion of the compressed shortest path for one ordered pair.
struct PairExp {
    bool exists = false;
    TreePtr tree;            // null with exists set => empty MES (one nm edge)
    double adj_path = 0.0;   // eps_under-adjusted cost incl. tips
    int tip_a = -1, tip_b = -1;
    uint64_t sig = 0;        // identity of (arc sequence, arc expansions)
};

// Per-cell compressed graph G_cell plus caches. Node order: A-clusters
// 0..sA-1 then B-clusters 0..sB-1 (cluster order from the hierarchy).
struct CellState {
    int sA = 0, sB = 0;
    std::vector<Arc> ab;  // sA x sB, [x*sB+y]: A_x -> B_y (non-matching dir)
    std::vector<Arc> ba;  // sB x sA, [y*sA+x]: B_y -> A_x (matching dir)
    // matching edges между cluster pairs: key (aCl, bCl) relative indices,
    // entries (-len, aid, bid) so begin() is the longest edge, ties min aid
    std::map<std::pair<int16_t, int16_t>, std::set<std::tuple<double, int, int>>> medges;
    std::vector<double> dist;    // (sA+sB)^2
    std::vector<int16_t> succ;   // next node on the min path
    std::vector<PairExp> exp_ab;  // sA x sB
    std::vector<PairExp> exp_ba;  // sB x sA
    std::vector<uint64_t> asig_ab, asig_ba;  // expansion identity per arc
    // static per-child index: child cluster lists grouped by the parent
    // cluster their subcell maps into (A lists by x, B lists by y)
    struct ChildMap {
        std::vector<std::vector<int16_t>> a_by_x;  // child cx values
        std::vector<std::vector<int16_t>> b_by_y;  // child cy values (local)
    };
    std::vector<ChildMap> childmaps;  // aligned with Cell::children
    bool apsp_valid = false;
    bool stable = false;
    uint64_t version = 0;
    // pending work, consumed by Repair
    bool dirty_all = true;
    bool free_dirty = false;
    std::set<std::pair<int16_t, int16_t>> dirty_ab, dirty_ba;  // arcs to re-weigh
    std::set<int16_t> free_changed;  // clusters whose free set changed

    int s() const { return sA + sB; }
    bool any_dirty() const {
        return dirty_all || free_dirty || !dirty_ab.empty() || !dirty_ba.empty() ||
               !free_changed.empty();
    }
};

// Floyd-Warshall over the bipartite arc set; returns false if a negative
// cycle exists (dist/succ are then not usable).
bool apsp_floyd_warshall(CellState& cs);

// Deterministic negative-cycle extraction (Bellman-Ford from a virtual
// source); returns the cycle as a node sequence v0 -> v1 -> ... -> v0.
std::vector<int> extract_negative_cycle(const CellState& cs);

// Reference APSP used by tests (independent route): Bellman-Ford per source.
struct ApspRef {
    std::vector<double> dist;
    bool negative_cycle = false;
};
ApspRef apsp_bellman_ford_reference(int sA, int sB, const std::vector<double>& wab,
                                    const std::vector<double>& wba);

}  // namespace geomatch
