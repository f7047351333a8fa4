#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "geomatch/compressed.hpp"
#include "geomatch/conditioner.hpp"
#include "geomatch/oracle.hpp"
#include "test_support.hpp"

using namespace geomatch;
using namespace testsup;

namespace {

CellState make_graph(int sA, int sB, const std::vector<double>& wab,
                     const std::vector<double>& wba) {
    CellState cs;
    cs.sA = sA;
    cs.sB = sB;
    cs.ab.resize(size_t(sA) * sB);
    cs.ba.resize(size_t(sB) * sA);
    for (size_t i = 0; i < wab.size(); ++i) cs.ab[i].w = wab[i];
    for (size_t i = 0; i < wba.size(); ++i) cs.ba[i].w = wba[i];
    return cs;
}

}  // namespace

TEST_CASE("two-node graph without negative cycle") {
    CellState cs = make_graph(1, 1, {5.0}, {-2.0});
    REQUIRE(apsp_floyd_warshall(cs));
    CHECK(cs.dist[0 * 2 + 1] == doctest::Approx(5.0));
    CHECK(cs.dist[1 * 2 + 0] == doctest::Approx(-2.0));
}

TEST_CASE("two-node graph with negative cycle") {
    CellState cs = make_graph(1, 1, {1.0}, {-2.0});
    CHECK(!apsp_floyd_warshall(cs));
    auto cyc = extract_negative_cycle(cs);
    REQUIRE(cyc.size() == 2);
    // arc weights around the extracted cycle sum negative
    double w = 0.0;
    for (size_t t = 0; t < cyc.size(); ++t) {
        int u = cyc[t], v = cyc[(t + 1) % cyc.size()];
        w += u < 1 ? cs.ab[size_t(v) - 1].w : cs.ba[size_t(v)].w;
    }
    CHECK(w < 0.0);
}

TEST_CASE("floyd-warshall agrees with bellman-ford reference") {
    CounterRng rng{424242};
    uint64_t ctr = 0;
    for (int trial = 0; trial < 200; ++trial) {
        int sA = 1 + int(rng.below(ctr++, 5));
        int sB = 1 + int(rng.below(ctr++, 5));
        std::vector<double> wab(size_t(sA) * sB, kInfW), wba(size_t(sB) * sA, kInfW);
        for (auto& w : wab)
            if (rng.uniform(ctr++) < 0.8) w = std::floor(rng.uniform(ctr++) * 20.0);
        for (auto& w : wba)
            if (rng.uniform(ctr++) < 0.5) w = std::floor(rng.uniform(ctr++) * 20.0) - 10.0;
        CellState cs = make_graph(sA, sB, wab, wba);
        ApspRef ref = apsp_bellman_ford_reference(sA, sB, wab, wba);
        bool ok = apsp_floyd_warshall(cs);
        CAPTURE(trial);
        CHECK(ok == !ref.negative_cycle);
        if (ok) {
            int s = sA + sB;
            for (int u = 0; u < s; ++u)
                for (int v = 0; v < s; ++v) {
                    double a = cs.dist[size_t(u) * s + v];
                    double b = ref.dist[size_t(u) * s + v];
                    if (a == kInfW || b == kInfW)
                        CHECK(a == b);
                    else
                        CHECK(a == doctest::Approx(b).epsilon(1e-12));
                }
        } else {
            auto cyc = extract_negative_cycle(cs);
            REQUIRE(!cyc.empty());
            double w = 0.0;
            for (size_t t = 0; t < cyc.size(); ++t) {
                int u = cyc[t], v = cyc[(t + 1) % cyc.size()];
                w += u < sA ? wab[size_t(u) * sB + (v - sA)] : wba[size_t(u - sA) * sA + v];
            }
            CHECK(w < 0.0);
        }
    }
}

TEST_CASE("bridge arc weights on a live engine") {
    // two far pairs: top-level arcs between their subcells are bridges
    RawInstance inst;
    inst.d = 2;
    inst.a = {pt2(0, 0), pt2(60, 0)};
    inst.b = {pt2(2, 0), pt2(62, 0)};
    ConditionedInstance cond = condition(inst, 0.5, 4.0);
    DerivedParams params = derive_params(ConstantsConfig::practical(), cond.n, 2, 0.5);
    Hierarchy hier(cond, params);
    ConstantsConfig cfg = ConstantsConfig::practical();
    Engine eng(hier, cfg, Norm::L2);
    eng.initialize();
    int checked = 0;
    for (int ci = 0; ci < hier.num_cells(); ++ci) {
        const Cell& c = hier.cell(ci);
        const CellState& cs = eng.cell_state(ci);
        if (cs.sA == 0) continue;
        for (int x = 0; x < cs.sA; ++x) {
            for (int y = 0; y < cs.sB; ++y) {
                const Arc& arc = cs.ab[size_t(x) * cs.sB + y];
                if (arc.kind != ArcKind::BridgeNm || arc.w == kInfW) continue;
                const Cluster& ca = c.clusters[size_t(x)];
                const Cluster& cb = c.clusters[size_t(c.n_a + y)];
                PtD za{}, zb{};
                for (int i = 0; i < 2; ++i) {
                    za[i] = hier.subcell_center(ca.sub, c.level, i);
                    zb[i] = hier.subcell_center(cb.sub, c.level, i);
                }
                double expect = dist(za, zb, 2) + hier.lell(c.level);
                CHECK(arc.w == doctest::Approx(expect).epsilon(1e-12));
                ++checked;
            }
        }
    }
    CHECK(checked > 0);
    // matching-direction bridge arcs are infinite while M is empty
    for (int ci = 0; ci < hier.num_cells(); ++ci) {
        const CellState& cs = eng.cell_state(ci);
        for (const Arc& arc : cs.ba)
            if (arc.kind == ArcKind::BridgeM) CHECK(arc.w == kInfW);
    }
}

TEST_CASE("internal arc weights equal brute-force certificate search") {
    RawInstance inst = random_instance(8, 2, 7);
    double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
    ConditionedInstance cond = condition(inst, 0.5, opt);
    DerivedParams params = derive_params(ConstantsConfig::practical(), cond.n, 2, 0.5);
    Hierarchy hier(cond, params);
    ConstantsConfig cfg = ConstantsConfig::practical();
    Engine eng(hier, cfg, Norm::L2);
    MatcherResult res = eng.run();
    REQUIRE(res.ok);
    int checked = 0;
    for (int ci = 0; ci < hier.num_cells(); ++ci) {
        const Cell& c = hier.cell(ci);
        const CellState& cs = eng.cell_state(ci);
        if (cs.sA == 0 || !cs.stable) continue;
        int64_t S = hier.subcell_side(c.level);
        for (int x = 0; x < cs.sA; ++x) {
            for (int y = 0; y < cs.sB; ++y) {
                const Arc& arc = cs.ab[size_t(x) * cs.sB + y];
                if (arc.kind != ArcKind::Internal) continue;
                // brute force over children cells and cluster pairs
                double best = kInfW;
                for (int ch : c.children) {
                    const Cell& cc = hier.cell(ch);
                    const CellState& ccs = eng.cell_state(ch);
                    if (ccs.sA == 0) continue;
                    int64_t L = hier.cell_side(cc.level);
                    int64_t Sc = hier.subcell_side(cc.level);
                    auto inside = [&](const PtI& sub) {
                        for (int i = 0; i < 2; ++i) {
                            int64_t lo = sub[i] * S;
                            if (lo < cc.anchor[i] || lo + S > cc.anchor[i] + L) return false;
                        }
                        return true;
                    };
                    const Cluster& pa = c.clusters[size_t(x)];
                    const Cluster& pb = c.clusters[size_t(c.n_a + y)];
                    if (!inside(pa.sub) || !inside(pb.sub)) continue;
                    for (int cx = 0; cx < ccs.sA; ++cx) {
                        for (int cy = 0; cy < ccs.sB; ++cy) {
                            const Cluster& qa = cc.clusters[size_t(cx)];
                            const Cluster& qb = cc.clusters[size_t(cc.n_a + cy)];
                            bool ma = true, mb = true;
                            for (int i = 0; i < 2; ++i) {
                                if (floordiv(qa.sub[i] * Sc, S) != pa.sub[i]) ma = false;
                                if (floordiv(qb.sub[i] * Sc, S) != pb.sub[i]) mb = false;
                            }
                            if (!ma || !mb) continue;
                            const PairExp& pe = ccs.exp_ab[size_t(cx) * ccs.sB + cy];
                            if (!pe.exists) continue;
                            best = std::min(best, pe.adj_path + hier.lell(c.level));
                        }
                    }
                }
                CAPTURE(ci);
                if (arc.w == kInfW)
                    CHECK(best == kInfW);
                else
                    CHECK(arc.w == doctest::Approx(best).epsilon(1e-12));
                ++checked;
            }
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("select candidate none when everything saturated") {
    RawInstance inst = random_instance(4, 2, 21);
    double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
    ConditionedInstance cond = condition(inst, 0.5, opt);
    DerivedParams params = derive_params(ConstantsConfig::practical(), cond.n, 2, 0.5);
    Hierarchy hier(cond, params);
    ConstantsConfig cfg = ConstantsConfig::practical();
    Engine eng(hier, cfg, Norm::L2);
    MatcherResult res = eng.run();
    REQUIRE(res.ok);
    // perfect matching: no unsaturated clusters anywhere
    for (int ci = 0; ci < hier.num_cells(); ++ci)
        for (const Cluster& cl : hier.cell(ci).clusters) CHECK(!cl.unsaturated());
}

TEST_CASE("debug dump lists arcs with kinds and weights") {
    RawInstance inst = random_instance(4, 2, 5);
    ConditionedInstance cond = condition(inst, 0.5, 30.0);
    DerivedParams params = derive_params(ConstantsConfig::practical(), cond.n, 2, 0.5);
    Hierarchy hier(cond, params);
    ConstantsConfig cfg = ConstantsConfig::practical();
    Engine eng(hier, cfg, Norm::L2);
    eng.initialize();
    std::string dump;
    for (int ci = 0; ci < hier.num_cells(); ++ci) {
        if (eng.cell_state(ci).sA > 0) {
            dump = eng.dump_cell(ci);
            break;
        }
    }
    CHECK(dump.find("bridge") != std::string::npos);
    CHECK(dump.find("|") != std::string::npos);
}
