#pragma once

#include <vector>

#include "geomatch/geometry.hpp"
#include "geomatch/instance.hpp"

namespace geomatch {

struct SpannerEdge {
    int u = 0, v = 0;  // indices into A (0..n-1) then B (n..2n-1)
    double w = 0.0;
};

// Euclidean 2-spanner on A u B via a well-separated pair decomposition over a
// fair-split tree (separation 12 gives stretch (s+4)/(s-4) = 2); one edge per
// WSPD pair between smallest-index representatives.
std::vector<SpannerEdge> build_spanner(const RawInstance& inst, Norm norm = Norm::L2);

// Kruskal over the spanner edges, ascending weight, ties by (u, v); stops as
// soon as every component holds equally many A- and B-points and returns the
// weight of the last edge added.
CoarseEstimate coarse_estimate(const RawInstance& inst, Norm norm = Norm::L2);
CoarseEstimate coarse_estimate_from_edges(int n, std::vector<SpannerEdge> edges);

}  // namespace geomatch
