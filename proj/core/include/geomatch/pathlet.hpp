#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <unordered_map>
#include <vector>

#include "geomatch/hierarchy.hpp"

namespace geomatch {

struct MatchEdge {
    int a = -1, b = -1;
    bool operator==(const MatchEdge&) const = default;
    auto operator<=>(const MatchEdge&) const = default;
};

// Residual-graph edge; matching edges run B->A, non-matching A->B.
struct ResidualEdge {
    int a = -1, b = -1;
    bool matching = false;
};

struct MesTree;
using TreePtr = std::shared_ptr<const MesTree>;

// Contiguous leaf range [lo, hi] (inclusive) of a source MES-tree.
struct Slice {
    TreePtr src;
    int lo = 0, hi = -1;
    int len() const { return hi - lo + 1; }
    bool empty() const { return hi < lo; }
};

// One root child of an MES-tree: either a matching (bridge) edge or a slice
// of a lower tree, with cached aggregates of the pathlet as a residual path.
struct TreeChild {
    bool is_leaf = false;
    MatchEdge edge{};
    Slice slice{};
    int m = 0;
    double adj = 0.0;  // eps_under-adjusted cost of the pathlet path
    int first_b = -1, last_a = -1;
};

struct MesTree {
    uint64_t id = 0;
    uint64_t content = 0;  // identity of the leaf sequence (value semantics)
    int level = 0;
    int cell_idx = -1;
    std::vector<TreeChild> kids;
    std::vector<int> prefix;  // prefix[i] = number of leaves before kid i
    int m_total = 0;
    double adj_total = 0.0;
    int first_b = -1, last_a = -1;
};

// A pathlet in a concatenation sequence: a slice or a single bridge edge.
struct Part {
    bool is_leaf = false;
    MatchEdge edge{};
    int leaf_cell = -1;  // bridge arc's cell (leaf only)
    int leaf_level = 0;
    Slice slice{};
    int len() const { return is_leaf ? 1 : slice.len(); }
    bool empty() const { return !is_leaf && slice.empty(); }
};

// Compact representation of an alternating path/cycle: MES as parts plus
// cycle flag and tips (tips null for cycles and matching-ended paths).
struct CompactPath {
    std::vector<Part> parts;
    bool cycle = false;
    int tip_a = -1, tip_b = -1;
};

struct PathCtx {
    const Hierarchy* H = nullptr;
    double coeff = 0.0;  // c0 * eps_under
    Norm norm = Norm::L2;
    double cost(int aid, int bid) const {
        return dist(H->grid_a(aid), H->grid_b(bid), H->dim(), norm);
    }
    double adj_nm(int aid, int bid) const { return (1.0 + coeff) * cost(aid, bid); }
    double adj_m(int aid, int bid) const { return (coeff - 1.0) * cost(aid, bid); }
};

struct SliceAgg {
    int m = 0;
    double adj = 0.0;
    int first_b = -1, last_a = -1;
};

// Tree arena, canonical-pathlet registry, and intersection tables.
class PathletStore {
  public:
    explicit PathletStore(const PathCtx& ctx) : ctx_(ctx) {}

    const PathCtx& ctx() const { return ctx_; }

    // Concatenate parts (empty ones must already be dropped) into a new tree.
    TreePtr concatenate(const std::vector<Part>& parts, int level, int cell_idx);

    SliceAgg agg(const Slice& s) const;
    SliceAgg agg(const Part& p) const;

    MatchEdge edge_at(const TreePtr& t, int pos) const;
    MatchEdge edge_at(const Part& p, int rel) const;

    // position of the median edge of a part, relative to the part
    int median_rel(const Part& p) const { return (p.len() + 1) / 2 - 1; }

    Part prefix_excl(const Part& p, int rel) const;  // edges strictly before rel
    Part suffix_incl(const Part& p, int rel) const;  // edges from rel onward
    Part subrange(const Part& p, int rel_lo, int rel_hi) const;

    bool intersects(const Part& p1, const Part& p2);
    // last edge of p1 present in p2: (rel position in p1, rel position in p2)
    // valid iff found
    struct LceResult {
        bool found = false;
        int rel1 = -1, rel2 = -1;
    };
    LceResult last_common_edge(const Part& p1, const Part& p2);

    double adj_cost(const CompactPath& cp) const;
    std::vector<ResidualEdge> report(const CompactPath& cp) const;
    void report_part(const Part& p, std::vector<MatchEdge>& out) const;

    // intersection-table maintenance. Entries are always memoized on first
    // query; the eager per-level sweep computes the not-yet-present entries
    // for freshly exposed canonical pathlets against sibling-cell pathlets.
    // The sweep is quadratic in exposed pathlets, so engine runs keep it off
    // and rely on on-demand population; tests can enable it to check the
    // level-synchronous invariant.
    void set_eager_tables(bool on) { eager_tables_ = on; }
    void update_tables_for_new_trees();
    size_t table_size() const { return table_.size(); }
    uint64_t table_lazy_fills() const { return lazy_fills_; }
    void sweep();  // drop table entries and registry rows of dead trees

    uint64_t trees_created() const { return next_id_; }

  private:
    struct CanonNode {
        bool is_leaf = false;
        MatchEdge edge{};
        Slice slice{};
        int cell_idx = -1;
        int level = 0;
    };
    void canon_nodes(const Part& p, std::vector<CanonNode>& out) const;
    void canon_nodes_slice(const Slice& s, std::vector<CanonNode>& out) const;
    bool canon_intersect(const CanonNode& u, const CanonNode& v,
                         std::map<std::array<int64_t, 8>, bool>& memo, bool use_table);
    bool find_edge_pos(const Slice& s, const MatchEdge& e, int& pos) const;

    std::array<int64_t, 8> canon_key(const CanonNode& u, const CanonNode& v) const;

    PathCtx ctx_;
    uint64_t next_id_ = 1;
    std::map<std::array<int64_t, 8>, bool> table_;
    // registry: tree id -> (weak ref, registered canonical slices of it)
    struct RegRow {
        std::weak_ptr<const MesTree> tree;
        int cell_idx = -1;
        std::vector<std::pair<int, int>> slices;
    };
    std::map<uint64_t, RegRow> registry_;
    std::map<int, std::vector<uint64_t>> by_cell_;  // cell idx -> registry rows
    bool eager_tables_ = false;
    std::vector<std::weak_ptr<const MesTree>> fresh_;  // built since last table update
    uint64_t lazy_fills_ = 0;
};

}  // namespace geomatch
