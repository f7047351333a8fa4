#pragma once

#include <vector>

#include "geomatch/pathlet.hpp"

namespace geomatch {

// Expansion of one compressed arc, the raw material of ConstructExpansion.
struct ArcExpansion {
    enum Kind { NmEdge, MEdge, Tree } kind = NmEdge;
    // NmEdge: a single non-matching edge (tip_a, tip_b), empty MES
    // MEdge: a matching bridge edge (leaf pathlet)
    // Tree: a child pair expansion; tips carried for non-matching direction
    MatchEdge edge{};
    int leaf_cell = -1, leaf_level = 0;
    TreePtr tree;
    int tip_a = -1, tip_b = -1;
};

struct SimplifyStats {
    int64_t peels = 0;
    int64_t binary_steps = 0;
    double max_conservation_err = 0.0;
};

struct ExpansionResult {
    bool aborted = false;   // a reducing cycle was found
    CompactPath reducing;   // simple reducing cycle (when aborted)
    std::vector<Part> parts;  // simple MES pathlet sequence (when not aborted)
    int tip_a = -1, tip_b = -1;
};

// Greedy simplification of the concatenated arc expansions (paper's
// ConstructExpansion): duplicate matching edges are cut out as cycles; a
// reducing cycle aborts the construction.
ExpansionResult construct_expansion(PathletStore& store, const std::vector<ArcExpansion>& arcs,
                                    SimplifyStats* stats = nullptr);

// Extracts a simple reducing subcycle from a reducing (possibly non-simple)
// cycle given as a pathlet sequence.
CompactPath simple_reducing_subcycle(PathletStore& store, const CompactPath& cycle,
                                     SimplifyStats* stats = nullptr);

}  // namespace geomatch
