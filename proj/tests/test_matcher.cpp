#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "geomatch/conditioner.hpp"
#include "geomatch/oracle.hpp"
#include "test_support.hpp"

using namespace geomatch;
using namespace testsup;

namespace {

struct Run {
    ConditionedInstance cond;
    DerivedParams params;
    std::unique_ptr<Hierarchy> hier;
    std::unique_ptr<Engine> eng;
    MatcherResult result;
};

std::unique_ptr<Run> run_conditioned(const RawInstance& inst, double eps, double beta,
                                     ConstantsConfig cfg = ConstantsConfig::practical(),
                                     const Engine::RoundHook& hook = nullptr) {
    auto r = std::make_unique<Run>();
    r->cond = condition(inst, eps, beta);
    if (r->cond.n == 0) return r;
    r->params = derive_params(cfg, r->cond.n, r->cond.d, eps);
    r->hier = std::make_unique<Hierarchy>(r->cond, r->params);
    r->eng = std::make_unique<Engine>(*r->hier, cfg, Norm::L2);
    r->result = r->eng->run(nullptr, hook);
    return r;
}

std::vector<PtD> to_ptd(const std::vector<PtI>& v, int d) {
    std::vector<PtD> out(v.size());
    for (size_t i = 0; i < v.size(); ++i)
        for (int k = 0; k < d; ++k) out[i][k] = double(v[i][k]);
    return out;
}

}  // namespace

TEST_CASE("single pair: the only augmenting path") {
    RawInstance inst;
    inst.d = 2;
    inst.a = {pt2(1, 1)};
    inst.b = {pt2(7, 2)};
    auto r = run_conditioned(inst, 0.5, dist(inst.a[0], inst.b[0], 2));
    REQUIRE(r->result.ok);
    CHECK(r->result.match_a == std::vector<int>{0});
    CHECK(r->result.stats.rounds == 1);
}

TEST_CASE("crossing pairs get uncrossed") {
    // greedy-suboptimal configuration: the parallel matching wins
    RawInstance inst;
    inst.d = 2;
    inst.a = {pt2(0, 0), pt2(10, 0)};
    inst.b = {pt2(11, 0), pt2(1, 0)};
    double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
    auto r = run_conditioned(inst, 0.25, opt);
    REQUIRE(r->result.ok);
    double cost = 0.0;
    for (int i = 0; i < 2; ++i)
        cost += dist(inst.a[size_t(i)], inst.b[size_t(r->result.match_a[size_t(i)])], 2);
    CHECK(cost <= (1.0 + 0.25) * opt + 1e-9);
}

TEST_CASE("structural contract of every round's path") {
    for (uint64_t seed = 1; seed <= 8; ++seed) {
        RawInstance inst = random_instance(10, 2, seed * 7);
        double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
        int bad = 0;
        auto hook = [&](const Engine::RoundInfo& ri) {
            // alternation and simplicity
            if (ri.path.empty()) ++bad;
            std::set<std::pair<int, int>> medges;
            for (size_t t = 0; t < ri.path.size(); ++t) {
                if (ri.path[t].matching != (t % 2 == 1)) ++bad;
                if (ri.path[t].matching && !medges.insert({ri.path[t].a, ri.path[t].b}).second)
                    ++bad;
            }
            // both tips free in the round-start matching
            int tip_a = ri.path.front().a;
            int tip_b = ri.path.back().b;
            if (ri.match_a[size_t(tip_a)] >= 0) ++bad;
            for (int v : ri.match_a)
                if (v == tip_b) ++bad;
        };
        auto r = run_conditioned(inst, 0.25, opt, ConstantsConfig::practical(), hook);
        if (r->cond.n == 0) continue;
        REQUIRE(r->result.ok);
        CHECK(bad == 0);
    }
}

TEST_CASE("findpath gap against exhaustive adj-star") {
    // Lemma-exact property: needs the full constants chain, i.e. theory mode
    // (practical constants trade the chain for desk-scale speed and can
    // overshoot adj* by a small penalty term).
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        RawInstance inst = random_instance(6, 2, seed * 131);
        double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
        int violations = 0;
        ConditionedInstance cond_copy;
        DerivedParams params_copy;
        const Hierarchy* hier_ptr = nullptr;
        auto runner = std::make_unique<Run>();
        runner->cond = condition(inst, 0.25, opt);
        if (runner->cond.n == 0) continue;
        cond_copy = runner->cond;
        params_copy = derive_params(ConstantsConfig::theory(), runner->cond.n, 2, 0.25);
        runner->params = params_copy;
        runner->hier = std::make_unique<Hierarchy>(runner->cond, runner->params);
        hier_ptr = runner->hier.get();
        runner->eng = std::make_unique<Engine>(*runner->hier, ConstantsConfig::theory(),
                                               Norm::L2);
        auto pa = to_ptd(cond_copy.a, 2);
        auto pb = to_ptd(cond_copy.b, 2);
        auto hook = [&](const Engine::RoundInfo& ri) {
            // grid coordinates scale conditioned ones by 2^k; adjusted costs
            // scale linearly, so compare in conditioned units
            double scale = double(int64_t(1) << hier_ptr->k_shift());
            double got = ri.path_adj_under / scale;
            double star = oracle::adj_star(pa, pb, 2, ri.match_a, params_copy.adj_coeff_bar);
            if (got > star + 1e-6 * (1.0 + std::fabs(star))) ++violations;
        };
        runner->result = runner->eng->run(nullptr, hook);
        REQUIRE(runner->result.ok);
        CHECK(violations == 0);
    }
}

TEST_CASE("cycle invariant at round starts") {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        RawInstance inst = random_instance(7, 2, seed * 13 + 5);
        double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
        auto runner = std::make_unique<Run>();
        runner->cond = condition(inst, 0.25, opt);
        if (runner->cond.n == 0) continue;
        runner->params = derive_params(ConstantsConfig::theory(), runner->cond.n, 2, 0.25);
        runner->hier = std::make_unique<Hierarchy>(runner->cond, runner->params);
        runner->eng =
            std::make_unique<Engine>(*runner->hier, ConstantsConfig::theory(), Norm::L2);
        auto pa = to_ptd(runner->cond.a, 2);
        auto pb = to_ptd(runner->cond.b, 2);
        double coeff = runner->params.adj_coeff_bar;
        int violations = 0;
        auto hook = [&](const Engine::RoundInfo& ri) {
            auto cycles = oracle::enumerate_alternating_cycles(pa, pb, 2, ri.match_a);
            for (const auto& cyc : cycles)
                if (cyc.adj(coeff) < -1e-9) ++violations;
        };
        runner->result = runner->eng->run(nullptr, hook);
        REQUIRE(runner->result.ok);
        CHECK(violations == 0);
    }
}

TEST_CASE("repair is idempotent on untouched cells") {
    RawInstance inst = random_instance(9, 2, 44);
    auto r = run_conditioned(inst, 0.5, oracle::hungarian(inst.a, inst.b, 2).cost);
    REQUIRE(r->result.ok);
    // re-run repair on every stable cell: no cycles, unchanged candidates
    for (int ci = 0; ci < r->hier->num_cells(); ++ci) {
        const CellState& cs = r->eng->cell_state(ci);
        uint64_t ver = cs.version;
        auto cyc = r->eng->repair(ci);
        CHECK(!cyc.has_value());
        CHECK(r->eng->cell_state(ci).version == ver);  // no-op repair
    }
}

TEST_CASE("matching size grows by one per round and stays consistent") {
    RawInstance inst = random_instance(12, 2, 91);
    double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
    int64_t prev = -1;
    int bad = 0;
    auto hook = [&](const Engine::RoundInfo& ri) {
        int64_t size = 0;
        for (int v : ri.match_a)
            if (v >= 0) ++size;
        if (size != prev + 1 && prev >= 0) ++bad;
        if (prev < 0 && size != 0) ++bad;
        prev = size;
    };
    auto r = run_conditioned(inst, 0.25, opt, ConstantsConfig::practical(), hook);
    REQUIRE(r->result.ok);
    CHECK(bad == 0);
    // perfect bijection
    std::set<int> bs(r->result.match_a.begin(), r->result.match_a.end());
    CHECK(int(bs.size()) == r->cond.n);
}

TEST_CASE("expansion inequality audited during a full run") {
    ConstantsConfig cfg = ConstantsConfig::practical();
    cfg.audit = 1;
    for (uint64_t seed : {3ULL, 17ULL}) {
        RawInstance inst = random_instance(16, 2, seed);
        double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
        auto r = run_conditioned(inst, 0.25, opt, cfg);
        REQUIRE(r->result.ok);
        CHECK(r->result.stats.expansion_violations == 0);
    }
}

TEST_CASE("theory mode matches on tiny instances") {
    ConstantsConfig cfg = ConstantsConfig::theory();
    RawInstance inst = random_instance(4, 2, 7);
    double opt = oracle::hungarian(inst.a, inst.b, 2).cost;
    auto r = run_conditioned(inst, 0.5, opt, cfg);
    if (r->cond.n > 0) {
        REQUIRE(r->result.ok);
        std::set<int> bs(r->result.match_a.begin(), r->result.match_a.end());
        CHECK(int(bs.size()) == r->cond.n);
    }
}
