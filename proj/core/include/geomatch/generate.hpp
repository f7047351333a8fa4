#pragma once

#include <string>

#include "geomatch/instance.hpp"

namespace geomatch {

// Deterministic pseudo-random instances from a counter-based generator
// (splitmix64 over seed ^ counter), identical across platforms.
// dist: "uniform"   -> coordinates uniform in [0, 100)
//       "clustered" -> ceil(sqrt(n)) Gaussian clusters (sigma 2) in [0, 100)^d
//       "grid"      -> integer coordinates in [0, 2*ceil(n^(1/d)))
RawInstance generate_instance(int n, int d, const std::string& dist, uint64_t seed);

}  // namespace geomatch
