#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <queue>

#include "doctest.h"
#include "geomatch/conditioner.hpp"
#include "geomatch/oracle.hpp"
#include "geomatch/spanner.hpp"
#include "test_support.hpp"

using namespace geomatch;
using namespace testsup;

namespace {

// Dijkstra over the spanner for the stretch oracle
std::vector<double> spanner_sssp(int src, int total, const std::vector<SpannerEdge>& edges) {
    std::vector<std::vector<std::pair<int, double>>> adj{size_t(total)};
    for (const auto& e : edges) {
        adj[size_t(e.u)].push_back({e.v, e.w});
        adj[size_t(e.v)].push_back({e.u, e.w});
    }
    std::vector<double> d(size_t(total), 1e300);
    std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>,
                        std::greater<>> pq;
    d[size_t(src)] = 0.0;
    pq.push({0.0, src});
    while (!pq.empty()) {
        auto [dist_u, u] = pq.top();
        pq.pop();
        if (dist_u > d[size_t(u)]) continue;
        for (auto [v, w] : adj[size_t(u)]) {
            if (dist_u + w < d[size_t(v)]) {
                d[size_t(v)] = dist_u + w;
                pq.push({d[size_t(v)], v});
            }
        }
    }
    return d;
}

void check_stretch(const RawInstance& inst, Norm norm) {
    auto edges = build_spanner(inst, norm);
    int total = 2 * inst.n();
    std::vector<PtD> all = inst.a;
    all.insert(all.end(), inst.b.begin(), inst.b.end());
    for (int u = 0; u < total; ++u) {
        auto d = spanner_sssp(u, total, edges);
        for (int v = u + 1; v < total; ++v) {
            double direct = dist(all[size_t(u)], all[size_t(v)], inst.d, norm);
            CAPTURE(u);
            CAPTURE(v);
            CHECK(d[size_t(v)] <= 2.0 * direct + 1e-9);
        }
    }
}

}  // namespace

TEST_CASE("two-point spanner is the single edge") {
    RawInstance inst;
    inst.d = 2;
    inst.a = {pt2(0, 0)};
    inst.b = {pt2(3, 4)};
    auto edges = build_spanner(inst);
    REQUIRE(edges.size() == 1);
    CHECK(edges[0].w == doctest::Approx(5.0));
}

TEST_CASE("spanner stretch <= 2 on random points") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) check_stretch(random_instance(5, 2, seed), Norm::L2);
    check_stretch(random_instance(6, 3, 7), Norm::L2);
    check_stretch(random_instance(5, 2, 9), Norm::L1);
    check_stretch(random_instance(5, 2, 10), Norm::LInf);
}

TEST_CASE("spanner stretch <= 2 on collinear points") {
    RawInstance inst;
    inst.d = 2;
    for (int i = 0; i < 5; ++i) inst.a.push_back(pt2(double(2 * i), 0));
    for (int i = 0; i < 5; ++i) inst.b.push_back(pt2(double(2 * i + 1), 0));
    check_stretch(inst, Norm::L2);
}

TEST_CASE("coarse estimate single pair") {
    RawInstance inst;
    inst.d = 1;
    PtD p{}, q{};
    p[0] = 0;
    q[0] = 5;
    inst.a = {p};
    inst.b = {q};
    auto est = coarse_estimate(inst);
    CHECK(est.w0 == doctest::Approx(5.0));
    // bracket (non-strict at n = 1 where OPT = w0 exactly)
    CHECK(est.w0 / 2 <= 5.0);
    CHECK(5.0 <= 1.0 * 1.0 * est.w0);
}

TEST_CASE("coarse bracket against hungarian oracle") {
    for (uint64_t seed = 1; seed <= 30; ++seed) {
        int n = 2 + int(seed % 19);
        RawInstance inst = random_instance(n, 2, seed * 13);
        auto est = coarse_estimate(inst);
        double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
        CAPTURE(seed);
        CHECK(est.w0 / 2.0 <= opt + 1e-9);
        CHECK(opt < double(n) * n * est.w0 + 1e-9);
    }
}

TEST_CASE("coarse bracket with coincident color pairs") {
    // A and B coincide: w0 = 0 and OPT = 0
    RawInstance inst = random_instance(6, 2, 5);
    inst.b = inst.a;
    auto est = coarse_estimate(inst);
    CHECK(est.w0 == 0.0);
}

TEST_CASE("condition scales and rounds half-up") {
    RawInstance inst;
    inst.d = 2;
    inst.a = {pt2(0, 0)};
    inst.b = {pt2(1, 0)};
    ConditionedInstance cond = condition(inst, 1.0, 1.0);
    // scale 8*sqrt(2) ~ 11.3137: B lands on (11, 0)
    REQUIRE(cond.n == 1);
    CHECK(cond.a[0][0] == 0);
    CHECK(cond.b[0][0] == 11);
    CHECK(cond.b[0][1] == 0);
    // conditioned OPT inside the P3 interval for beta = OPT
    double lo = 3.0 * std::sqrt(2.0), hi = 9.0 * std::sqrt(2.0);
    double opt_cond = 11.0;
    CHECK(opt_cond >= lo);
    CHECK(opt_cond <= hi);
}

TEST_CASE("co-located opposite points are pre-matched away") {
    RawInstance inst;
    inst.d = 2;
    inst.a = {pt2(5, 5), pt2(0, 0)};
    inst.b = {pt2(5, 5), pt2(50, 50)};
    ConditionedInstance cond = condition(inst, 0.5, 10.0);
    REQUIRE(cond.pre_matched.size() == 1);
    CHECK(cond.pre_matched[0].first == 0);
    CHECK(cond.pre_matched[0].second == 0);
    CHECK(cond.n == 1);
    // P2: no site holds both colors
    for (const auto& pa : cond.a)
        for (const auto& pb : cond.b) CHECK(pa != pb);
}

TEST_CASE("P3 holds when beta brackets the optimum") {
    int violations = 0;
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        int n = 4 + int(seed % 13);
        RawInstance inst = random_instance(n, 2, seed * 31);
        double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
        for (double f : {1.0, 1.7, 2.0}) {
            double beta = f * opt;
            ConditionedInstance cond = condition(inst, 0.5, beta);
            if (cond.n == 0) continue;
            auto r = oracle::hungarian(cond.a, cond.b, 2);
            double pre_cost = 0.0;  // pre-matched pairs add conditioned cost 0
            double total = r.cost + pre_cost;
            double lo = 3.0 * std::sqrt(2.0) * n / 0.5;
            double hi = 9.0 * std::sqrt(2.0) * n / 0.5;
            if (!(total >= lo - 1e-6 && total <= hi + 1e-6)) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("condition rejects bad arguments") {
    RawInstance inst = random_instance(3, 2, 1);
    CHECK_THROWS_AS(condition(inst, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(condition(inst, 1.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(condition(inst, 0.5, 0.0), std::invalid_argument);
    inst.a[0][0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(condition(inst, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("rounding displacement bound") {
    // conditioned OPT differs from sigma * OPT_raw by at most sqrt(d)*n/2
    for (uint64_t seed = 40; seed <= 50; ++seed) {
        int n = 3 + int(seed % 6);
        RawInstance inst = random_instance(n, 2, seed);
        double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
        ConditionedInstance cond = condition(inst, 0.5, opt);
        if (cond.n < n) continue;  // pre-matching complicates the comparison
        double opt_cond = oracle::hungarian(cond.a, cond.b, 2).cost;
        double bound = std::sqrt(2.0) * n / 2.0 + 1e-9;
        CHECK(std::fabs(opt_cond - cond.sigma * opt) <= bound);
    }
}
