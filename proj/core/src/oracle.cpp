#include "geomatch/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace geomatch {
namespace oracle {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::vector<double>> cost_matrix(const std::vector<PtD>& a,
                                             const std::vector<PtD>& b, int d, Norm norm) {
    size_t n = a.size();
    std::vector<std::vector<double>> c(n, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) c[i][j] = dist(a[i], b[j], d, norm);
    return c;
}
}  // namespace

ExactResult hungarian_cost(const std::vector<std::vector<double>>& cost) {
    int n = int(cost.size());
    ExactResult res;
    if (n == 0) return res;
    // Jonker-Volgenant style shortest augmenting paths, 1-based work arrays.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    res.match_a.assign(n, -1);
    res.pot_a.assign(n, 0.0);
    res.pot_b.assign(n, 0.0);
    for (int j = 1; j <= n; ++j)
        if (p[j]) res.match_a[p[j] - 1] = j - 1;
    for (int i = 1; i <= n; ++i) res.pot_a[i - 1] = u[i];
    for (int j = 1; j <= n; ++j) res.pot_b[j - 1] = v[j];
    res.cost = 0.0;
    for (int i = 0; i < n; ++i) res.cost += cost[i][res.match_a[i]];
    return res;
}

ExactResult hungarian(const std::vector<PtD>& a, const std::vector<PtD>& b, int d, Norm norm,
                      int cap) {
    if (a.size() != b.size()) throw std::invalid_argument("hungarian: size mismatch");
    if (int(a.size()) > cap) throw std::invalid_argument("hungarian: size cap exceeded");
    return hungarian_cost(cost_matrix(a, b, d, norm));
}

ExactResult hungarian(const std::vector<PtI>& a, const std::vector<PtI>& b, int d, Norm norm,
                      int cap) {
    std::vector<PtD> da(a.size()), db(b.size());
    for (size_t i = 0; i < a.size(); ++i)
        for (int k = 0; k < d; ++k) da[i][k] = double(a[i][k]);
    for (size_t i = 0; i < b.size(); ++i)
        for (int k = 0; k < d; ++k) db[i][k] = double(b[i][k]);
    return hungarian(da, db, d, norm, cap);
}

bool certify(const ExactResult& r, const std::vector<std::vector<double>>& cost, double tol) {
    int n = int(cost.size());
    double scale = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(cost[i][j]));
    double eps = tol * scale;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double red = cost[i][j] - r.pot_a[i] - r.pot_b[j];
            if (red < -eps) return false;
            if (r.match_a[i] == j && std::fabs(red) > eps) return false;
        }
    }
    return true;
}

std::vector<AltCycle> enumerate_alternating_cycles(const std::vector<PtD>& a,
                                                   const std::vector<PtD>& b, int d,
                                                   const std::vector<int>& match_a, Norm norm,
                                                   int max_len) {
    int n = int(a.size());
    if (n > 10 && max_len > 12)
        throw std::invalid_argument("enumerate_alternating_cycles: size cap exceeded");
    std::vector<AltCycle> out;
    // A cycle visits matched a-vertices: a_i -> b_{m(i)} is a matching edge
    // traversed backwards (B->A in the residual orientation means we walk
    // a_i's matched b, then hop by a non-matching edge to the next a).
    // Enumerate sequences of distinct matched a-indices; canonical start =
    // smallest index to dedupe rotations (orientation is fixed by residual
    // direction, so no reflection dedupe applies).
    std::vector<int> matched_as;
    for (int i = 0; i < n; ++i)
        if (match_a[i] >= 0) matched_as.push_back(i);
    std::vector<int> seq;
    std::vector<char> used(n, 0);

    auto emit = [&](const std::vector<int>& cyc) {
        AltCycle c;
        int k = int(cyc.size());
        for (int t = 0; t < k; ++t) {
            int ai = cyc[t];
            int bi = match_a[ai];
            int aj = cyc[(t + 1) % k];
            c.matched.push_back({ai, bi});
            double mcost = dist(a[ai], b[bi], d, norm);
            double ncost = dist(a[aj], b[bi], d, norm);
            // matching edge (b_i -> a_i) contributes -cost; the non-matching
            // edge (a_j, b_i) must not itself be the matching edge.
            c.net_cost += ncost - mcost;
            c.length += ncost + mcost;
        }
        out.push_back(std::move(c));
    };

    // walk: current b (from last matched a) connects to next a via a
    // non-matching edge, i.e. next a != partner of that b.
    auto extend = [&](auto&& self, int start, int cur_a) -> void {
        if (int(seq.size()) * 2 > max_len) return;
        int cur_b = match_a[cur_a];
        // Closing non-matching edge is (start, cur_b); needs >= 2 matching
        // edges and must not coincide with start's own matching edge.
        if (seq.size() >= 2 && match_a[start] != cur_b) emit(seq);
        for (int nxt : matched_as) {
            if (used[nxt] || nxt <= start) continue;
            if (match_a[nxt] == cur_b) continue;  // would reuse the matching edge
            used[nxt] = 1;
            seq.push_back(nxt);
            self(self, start, nxt);
            seq.pop_back();
            used[nxt] = 0;
        }
    };

    for (int s : matched_as) {
        used[s] = 1;
        seq = {s};
        extend(extend, s, s);
        used[s] = 0;
    }
    return out;
}

std::vector<AltPath> enumerate_augmenting_paths(const std::vector<PtD>& a,
                                                const std::vector<PtD>& b, int d,
                                                const std::vector<int>& match_a, Norm norm) {
    int n = int(a.size());
    if (n > 9) throw std::invalid_argument("enumerate_augmenting_paths: size cap exceeded");
    std::vector<int> match_b(n, -1);
    for (int i = 0; i < n; ++i)
        if (match_a[i] >= 0) match_b[match_a[i]] = i;

    std::vector<AltPath> out;
    std::vector<std::pair<int, int>> seq;
    std::vector<char> used_a(n, 0);

    // Path structure: free a0 -(nm)-> b1 [if b1 free: stop] -(m)-> a1 -(nm)-> b2 ...
    auto walk = [&](auto&& self, int tip_a, int cur_a) -> void {
        for (int bj = 0; bj < n; ++bj) {
            if (match_a[cur_a] == bj) continue;  // matching edge, not usable A->B
            bool on_path = false;
            for (auto& m : seq)
                if (m.second == bj) on_path = true;
            if (on_path) continue;
            if (match_b[bj] < 0) {
                AltPath p;
                p.tip_a = tip_a;
                p.tip_b = bj;
                p.matched = seq;
                int prev_a = tip_a;
                for (auto& m : seq) {
                    double nm = dist(a[prev_a], b[m.second], d, norm);
                    double mm = dist(a[m.first], b[m.second], d, norm);
                    p.net_cost += nm - mm;
                    p.length += nm + mm;
                    prev_a = m.first;
                }
                double nm = dist(a[prev_a], b[bj], d, norm);
                p.net_cost += nm;
                p.length += nm;
                out.push_back(std::move(p));
            } else {
                int ai = match_b[bj];
                if (used_a[ai]) continue;
                used_a[ai] = 1;
                seq.push_back({ai, bj});
                self(self, tip_a, ai);
                seq.pop_back();
                used_a[ai] = 0;
            }
        }
    };

    for (int i = 0; i < n; ++i) {
        if (match_a[i] >= 0) continue;
        used_a[i] = 1;
        seq.clear();
        walk(walk, i, i);
        used_a[i] = 0;
    }
    return out;
}

double adj_star(const std::vector<PtD>& a, const std::vector<PtD>& b, int d,
                const std::vector<int>& match_a, double coeff, Norm norm) {
    auto paths = enumerate_augmenting_paths(a, b, d, match_a, norm);
    double best = kInf;
    for (const auto& p : paths) best = std::min(best, p.adj(coeff));
    return best;
}

double brute_force_opt(const std::vector<PtD>& a, const std::vector<PtD>& b, int d, Norm norm) {
    int n = int(a.size());
    if (n > 9) throw std::invalid_argument("brute_force_opt: size cap exceeded");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = kInf;
    do {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += dist(a[i], b[perm[i]], d, norm);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return n == 0 ? 0.0 : best;
}

}  // namespace oracle
}  // namespace geomatch
