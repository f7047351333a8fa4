#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <string>

#include "geomatch/compressed.hpp"
#include "geomatch/config.hpp"
#include "geomatch/simplify.hpp"

namespace geomatch {

struct MatcherStats {
    int64_t rounds = 0;
    int64_t cancellations = 0;
    int64_t path_edges = 0;
    int64_t cycle_edges = 0;
    int64_t repairs = 0;
    double cost_grid = 0.0;
    bool budget_exhausted = false;
    std::string abort_reason;
    int64_t expansion_violations = 0;  // audit >= 1: adj(expansion) > w(pi)
    int64_t cycle_violations = 0;      // audit >= 1: canceled cycle with adj >= 0
    SimplifyStats simplify;
    // phase counters (diagnostics)
    int64_t fw_runs = 0, fw_ops = 0, pairs_walked = 0, pairs_rebuilt = 0, arcs_reweighed = 0;
    double t_fw = 0, t_walk = 0, t_rebuild = 0, t_reweigh = 0, t_candidates = 0;
};

struct MatcherResult {
    bool ok = false;
    std::vector<int> match_a;  // conditioned a index -> b index
    MatcherStats stats;
};

// The round loop over one conditioned instance: a global candidate queue,
// FindPath, Augment with reducing-cycle cancellation, bottom-up Repair.
// Strictly single-threaded.
class Engine {
  public:
    struct RoundInfo {
        int64_t round;
        const std::vector<int>& match_a;             // state at round start
        const std::vector<ResidualEdge>& path;       // the path about to be applied
        double path_adj_under;                       // its eps_under-adjusted cost
    };
    using RoundHook = std::function<void(const RoundInfo&)>;

    Engine(Hierarchy& hier, const ConstantsConfig& cfg, Norm norm);

    MatcherResult run(std::ostream* trace = nullptr, const RoundHook& hook = nullptr);

    // introspection (tests, audits, debug dump)
    const Hierarchy& hier() const { return *H_; }
    const CellState& cell_state(int idx) const { return cs_[size_t(idx)]; }
    const std::vector<int>& match_a() const { return match_a_; }
    double cost_grid() const { return cost_grid_; }
    PathletStore& store() { return store_; }
    std::string dump_cell(int idx) const;
    const MatcherStats& stats() const { return stats_; }

    // exposed for unit tests
    std::optional<std::vector<ResidualEdge>> repair(int cell_idx);
    void initialize();
    bool initialized() const { return initialized_; }

  private:
    struct QEntry {
        double key;
        int cell, x, y;
        uint64_t version;
        bool operator>(const QEntry& o) const {
            if (key != o.key) return key > o.key;
            if (cell != o.cell) return cell > o.cell;
            if (x != o.x) return x > o.x;
            return y > o.y;
        }
    };
    struct XiOrder {
        const Engine* eng;
        bool operator()(int a, int b) const;
    };

    int cell_family(int idx) const;
    bool cluster_unsat(int cell_idx, int cluster_idx) const;
    bool internal_candidates(int cell_idx, bool abdir, int x, int y,
                             std::vector<Certificate>& out) const;
    double weigh_bridge(int cell_idx, bool abdir, int x, int y) const;
    double weigh_internal(int cell_idx, bool abdir, int x, int y, Certificate& cert) const;
    void reweigh_arc(int cell_idx, bool abdir, int x, int y, bool& wchanged);
    bool choose_nm_pair(int cell_idx, int x, int y, int& aid, int& bid) const;
    uint64_t arc_sig(int cell_idx, bool abdir, int x, int y) const;
    ArcExpansion arc_expansion(int cell_idx, bool abdir, int x, int y) const;
    std::vector<int> pair_path_nodes(const CellState& cs, int from, int to) const;
    std::optional<std::vector<ResidualEdge>> refresh_pairs(
        int cell_idx, std::vector<std::tuple<bool, int, int>>& changed);
    void notify_parents(int cell_idx, const std::vector<std::tuple<bool, int, int>>& changed);
    bool candidate_with_free_tips(int cell_idx, int x, int y, double& adj, int& tip_a,
                                  int& tip_b) const;
    void push_candidate(int cell_idx);
    void apply_delta(const std::vector<ResidualEdge>& edges);
    bool process_xi();
    bool find_path(int& cell_out, CompactPath& cp, double& key);
    std::optional<std::vector<ResidualEdge>> expand_negative_cycle(int cell_idx,
                                                                   const std::vector<int>& nodes);
    double edge_len_grid(const ResidualEdge& e) const;
    double path_len_grid(const std::vector<ResidualEdge>& edges) const;

    Hierarchy* H_;
    ConstantsConfig cfg_;
    DerivedParams P_;
    Norm norm_;
    PathCtx ctx_;
    PathletStore store_;
    std::vector<CellState> cs_;
    std::vector<int> match_a_, match_b_;
    int n_ = 0;
    int msize_ = 0;
    double cost_grid_ = 0.0;
    double len_bound_grid_ = 0.0;
    double cost_bound_grid_ = 0.0;
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> queue_;
    std::set<int, XiOrder> xi_;
    MatcherStats stats_;
    bool initialized_ = false;
};

}  // namespace geomatch
