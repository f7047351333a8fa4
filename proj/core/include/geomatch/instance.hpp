#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "geomatch/geometry.hpp"

namespace geomatch {

struct RawInstance {
    int d = 0;
    std::vector<PtD> a;
    std::vector<PtD> b;

    int n() const { return int(a.size()); }

    // empty string means valid
    std::string validate() const {
        if (d < 1) return "dimension must be >= 1";
        if (d > kMaxDim) return "dimension larger than supported maximum (8)";
        if (a.size() != b.size()) return "point sets must have equal size";
        for (const auto& ps : {a, b})
            for (const auto& p : ps)
                for (int i = 0; i < d; ++i)
                    if (!std::isfinite(p[i])) return "coordinates must be finite";
        return {};
    }
};

// Integer instance satisfying P1 (integer coordinates), P2 (no grid point
// holds both colors) with co-located opposite pairs removed up front, and
// P3 when beta brackets the optimum.
struct ConditionedInstance {
    int d = 0;
    int n = 0;          // pairs surviving pre-matching
    double sigma = 1.0; // 8*sqrt(d)*n_raw/(eps*beta)
    std::vector<PtI> a; // integer coordinates on the conditioned lattice
    std::vector<PtI> b;
    std::vector<int> raw_a; // provenance: conditioned index -> raw index
    std::vector<int> raw_b;
    std::vector<std::pair<int, int>> pre_matched; // (raw_a, raw_b) removed pairs
};

struct CoarseEstimate {
    double w0 = 0.0;
};

}  // namespace geomatch
