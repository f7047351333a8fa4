#pragma once

#include <ostream>

#include "geomatch/instance.hpp"
#include "geomatch/matcher.hpp"
#include "geomatch/spanner.hpp"

namespace geomatch {

struct BetaRunInfo {
    double beta = 0.0;
    bool completed = false;
    bool skipped = false;
    double cost_raw = 0.0;
    MatcherStats stats;
};

struct SolveResult {
    std::vector<int> match_a;  // raw a index -> raw b index
    double cost = 0.0;         // recomputed on raw coordinates
    double w0 = 0.0;
    int winner = -1;           // index into runs
    std::vector<BetaRunInfo> runs;
};

// Full pipeline: coarse estimate, beta-doubling loop over conditioned
// instances, cheapest perfect matching mapped back to raw indices.
// Guesses are tried ascending and pruned once provably out of the
// [OPT, 2*OPT] bracket (beta > 2 * best completed cost).
SolveResult solve(const RawInstance& inst, double eps,
                  const ConstantsConfig& cfg = ConstantsConfig::practical(),
                  Norm norm = Norm::L2, std::ostream* trace = nullptr);

}  // namespace geomatch
