#include "geomatch/compressed.hpp"

#include <algorithm>
#include <cassert>

namespace geomatch {

bool apsp_floyd_warshall(CellState& cs) {
    int s = cs.s();
    cs.dist.assign(size_t(s) * s, kInfW);
    cs.succ.assign(size_t(s) * s, int16_t(-1));
    auto D = [&](int u, int v) -> double& { return cs.dist[size_t(u) * s + v]; };
    auto S = [&](int u, int v) -> int16_t& { return cs.succ[size_t(u) * s + v]; };
    for (int u = 0; u < s; ++u) D(u, u) = 0.0;
    for (int x = 0; x < cs.sA; ++x)
        for (int y = 0; y < cs.sB; ++y) {
            double w = cs.ab[size_t(x) * cs.sB + y].w;
            if (w < D(x, cs.sA + y)) {
                D(x, cs.sA + y) = w;
                S(x, cs.sA + y) = int16_t(cs.sA + y);
            }
        }
    for (int y = 0; y < cs.sB; ++y)
        for (int x = 0; x < cs.sA; ++x) {
            double w = cs.ba[size_t(y) * cs.sA + x].w;
            if (w < D(cs.sA + y, x)) {
                D(cs.sA + y, x) = w;
                S(cs.sA + y, x) = int16_t(x);
            }
        }
    for (int k = 0; k < s; ++k) {
        for (int u = 0; u < s; ++u) {
            double duk = D(u, k);
            if (duk == kInfW) continue;
            const double* dk = &cs.dist[size_t(k) * s];
            double* du = &cs.dist[size_t(u) * s];
            for (int v = 0; v < s; ++v) {
                if (dk[v] == kInfW) continue;
                double cand = duk + dk[v];
                if (cand < du[v]) {
                    du[v] = cand;
                    S(u, v) = S(u, k);
                }
            }
        }
    }
    for (int v = 0; v < s; ++v)
        if (D(v, v) < 0.0) return false;
    cs.apsp_valid = true;
    return true;
}

std::vector<int> extract_negative_cycle(const CellState& cs) {
    int s = cs.s();
    std::vector<double> d(size_t(s), 0.0);  // virtual source to every node
    std::vector<int> parent(size_t(s), -1);
    auto wfun = [&](int u, int v) {
        if (u < cs.sA && v >= cs.sA) return cs.ab[size_t(u) * cs.sB + (v - cs.sA)].w;
        if (u >= cs.sA && v < cs.sA) return cs.ba[size_t(u - cs.sA) * cs.sA + v].w;
        return kInfW;
    };
    int witness = -1;
    for (int round = 0; round < s + 1; ++round) {
        witness = -1;
        for (int u = 0; u < s; ++u) {
            for (int v = 0; v < s; ++v) {
                double w = wfun(u, v);
                if (w == kInfW) continue;
                if (d[u] + w < d[v]) {
                    d[v] = d[u] + w;
                    parent[v] = u;
                    witness = v;
                }
            }
        }
        if (witness < 0) break;
    }
    std::vector<int> cycle;
    if (witness < 0) return cycle;
    int x = witness;
    for (int i = 0; i < s + 1; ++i) x = parent[x];  // land inside the cycle
    std::vector<char> seen(size_t(s), 0);
    int y = x;
    while (!seen[size_t(y)]) {
        seen[size_t(y)] = 1;
        y = parent[y];
    }
    // y is on the cycle; collect it
    int start = y;
    cycle.push_back(start);
    for (int z = parent[start]; z != start; z = parent[z]) cycle.push_back(z);
    std::reverse(cycle.begin(), cycle.end());  // parent chain runs backwards
    return cycle;
}

ApspRef apsp_bellman_ford_reference(int sA, int sB, const std::vector<double>& wab,
                                    const std::vector<double>& wba) {
    int s = sA + sB;
    ApspRef ref;
    ref.dist.assign(size_t(s) * s, kInfW);
    auto wfun = [&](int u, int v) {
        if (u < sA && v >= sA) return wab[size_t(u) * sB + (v - sA)];
        if (u >= sA && v < sA) return wba[size_t(u - sA) * sA + v];
        return kInfW;
    };
    for (int src = 0; src < s; ++src) {
        std::vector<double> d(size_t(s), kInfW);
        d[size_t(src)] = 0.0;
        bool changed = true;
        for (int round = 0; round < s && changed; ++round) {
            changed = false;
            for (int u = 0; u < s; ++u) {
                if (d[size_t(u)] == kInfW) continue;
                for (int v = 0; v < s; ++v) {
                    double w = wfun(u, v);
                    if (w == kInfW) continue;
                    if (d[size_t(u)] + w < d[size_t(v)]) {
                        d[size_t(v)] = d[size_t(u)] + w;
                        changed = true;
                    }
                }
            }
        }
        // after s rounds any further improvement certifies a negative cycle
        for (int u = 0; u < s && !ref.negative_cycle; ++u) {
            if (d[size_t(u)] == kInfW) continue;
            for (int v = 0; v < s; ++v) {
                double w = wfun(u, v);
                if (w != kInfW && d[size_t(u)] + w < d[size_t(v)]) {
                    ref.negative_cycle = true;
                    break;
                }
            }
        }
        for (int v = 0; v < s; ++v) ref.dist[size_t(src) * s + v] = d[size_t(v)];
    }
    return ref;
}

}  // namespace geomatch
