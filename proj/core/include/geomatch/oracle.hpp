#pragma once

#include <optional>
#include <vector>

#include "geomatch/geometry.hpp"

namespace geomatch {
namespace oracle {

struct ExactResult {
    std::vector<int> match_a;  // match_a[i] = j matched to a_i
    double cost = 0.0;
    std::vector<double> pot_a;  // dual potentials
    std::vector<double> pot_b;
};

// Exact minimum-cost perfect matching, successive shortest paths with
// potentials, O(n^3). Throws if n exceeds `cap`.
ExactResult hungarian(const std::vector<PtD>& a, const std::vector<PtD>& b, int d,
                      Norm norm = Norm::L2, int cap = 512);
ExactResult hungarian(const std::vector<PtI>& a, const std::vector<PtI>& b, int d,
                      Norm norm = Norm::L2, int cap = 512);
ExactResult hungarian_cost(const std::vector<std::vector<double>>& cost);

// Complementary slackness: reduced costs >= -tol everywhere, == 0 on matched
// pairs (relative tolerance).
bool certify(const ExactResult& r, const std::vector<std::vector<double>>& cost,
             double tol = 1e-6);

// An alternating structure in the residual graph (matching edges directed
// B->A, non-matching A->B), stored as the vertex sequence a0,b0,a1,b1,...
struct AltCycle {
    // Matching edges (a_i matched to b_i) listed in cycle order; between
    // consecutive entries the non-matching edge (a_i, b_{i+1 mod k}).
    std::vector<std::pair<int, int>> matched;
    double net_cost = 0.0;
    double length = 0.0;  // Euclidean arc length
    double adj(double coeff) const { return net_cost + coeff * length; }
};

struct AltPath {
    int tip_a = -1;  // free a at the start
    int tip_b = -1;  // free b at the end
    // matching edges traversed (possibly empty), in order; path is
    // a_tip -> b(m1) -> a(m1) -> b(m2) ... -> b_tip
    std::vector<std::pair<int, int>> matched;
    double net_cost = 0.0;
    double length = 0.0;
    double adj(double coeff) const { return net_cost + coeff * length; }
};

// Exhaustive enumeration of simple alternating cycles w.r.t. matching
// `match_a` (match_a[i] = j or -1). Intended for n <= 10.
std::vector<AltCycle> enumerate_alternating_cycles(const std::vector<PtD>& a,
                                                   const std::vector<PtD>& b, int d,
                                                   const std::vector<int>& match_a,
                                                   Norm norm = Norm::L2,
                                                   int max_len = 12);

// Exhaustive enumeration of simple augmenting paths. Intended for n <= 8.
std::vector<AltPath> enumerate_augmenting_paths(const std::vector<PtD>& a,
                                                const std::vector<PtD>& b, int d,
                                                const std::vector<int>& match_a,
                                                Norm norm = Norm::L2);

// min adj over augmenting paths at the given coefficient; +inf if none.
double adj_star(const std::vector<PtD>& a, const std::vector<PtD>& b, int d,
                const std::vector<int>& match_a, double coeff, Norm norm = Norm::L2);

// Brute-force optimum by permutation enumeration (n <= 9).
double brute_force_opt(const std::vector<PtD>& a, const std::vector<PtD>& b, int d,
                       Norm norm = Norm::L2);

}  // namespace oracle
}  // namespace geomatch
