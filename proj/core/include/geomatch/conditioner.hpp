#pragma once

#include "geomatch/geometry.hpp"
#include "geomatch/instance.hpp"

namespace geomatch {

// Scales by 8*sqrt(d)*n/(eps*beta), rounds half-up to the integer lattice,
// and greedily pre-matches co-located opposite-color points so P1 and P2
// hold. If beta is in [OPT, 2*OPT] the conditioned optimum lands in
// [3*sqrt(d)*n/eps, 9*sqrt(d)*n/eps] (P3).
ConditionedInstance condition(const RawInstance& inst, double eps, double beta);

}  // namespace geomatch
