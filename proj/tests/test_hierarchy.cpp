#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "geomatch/conditioner.hpp"
#include "geomatch/hierarchy.hpp"
#include "test_support.hpp"

using namespace geomatch;
using namespace testsup;

namespace {

struct Setup {
    ConditionedInstance cond;
    DerivedParams params;
};

Setup make_setup(const RawInstance& inst, double eps, double beta,
                 ConstantsConfig cfg = ConstantsConfig::practical()) {
    Setup s;
    s.cond = condition(inst, eps, beta);
    s.params = derive_params(cfg, std::max(1, s.cond.n), s.cond.d, eps);
    return s;
}

}  // namespace

TEST_CASE("every point lies in exactly 2^d cells per level") {
    RawInstance inst = random_instance(12, 2, 3);
    Setup s = make_setup(inst, 0.5, 80.0);
    Hierarchy hier(s.cond, s.params);
    for (int level = 0; level <= hier.height(); ++level) {
        for (int id = 0; id < s.cond.n; ++id) {
            std::set<int> cells;
            for (int f = 0; f < hier.families(); ++f) {
                const auto& m = hier.member(0, id, level, f);
                REQUIRE(m.cell >= 0);
                CHECK(hier.box_contains_point(m.cell, hier.grid_a(id)));
                cells.insert(m.cell);
            }
            CHECK(int(cells.size()) == hier.families());
        }
    }
}

TEST_CASE("children are contained and aligned") {
    RawInstance inst = random_instance(25, 2, 11);
    Setup s = make_setup(inst, 0.5, 150.0);
    Hierarchy hier(s.cond, s.params);
    for (int ci = 0; ci < hier.num_cells(); ++ci) {
        const Cell& c = hier.cell(ci);
        int64_t side = hier.cell_side(c.level);
        for (int ch : c.children) {
            const Cell& cc = hier.cell(ch);
            CHECK(cc.level == c.level - 1);
            int64_t cside = hier.cell_side(cc.level);
            for (int i = 0; i < hier.dim(); ++i) {
                CHECK(cc.anchor[i] >= c.anchor[i]);
                CHECK(cc.anchor[i] + cside <= c.anchor[i] + side);
                // boundaries align with the child grid
                CHECK((cc.anchor[i] - c.anchor[i]) % (cside / 2) == 0);
            }
        }
        // every nonempty contained cell of level-1 appears as a child
        if (c.level >= 1) {
            for (int cj = 0; cj < hier.num_cells(); ++cj) {
                const Cell& other = hier.cell(cj);
                if (other.level != c.level - 1) continue;
                bool inside = true;
                int64_t os = hier.cell_side(other.level);
                for (int i = 0; i < hier.dim(); ++i)
                    if (other.anchor[i] < c.anchor[i] ||
                        other.anchor[i] + os > c.anchor[i] + side)
                        inside = false;
                bool listed =
                    std::find(c.children.begin(), c.children.end(), cj) != c.children.end();
                CHECK(inside == listed);
            }
        }
    }
}

TEST_CASE("subcell diameter bound per level") {
    RawInstance inst = random_instance(20, 2, 17);
    Setup s = make_setup(inst, 0.25, 120.0);
    Hierarchy hier(s.cond, s.params);
    for (int level = 0; level <= hier.height(); ++level) {
        double diam = std::sqrt(2.0) * double(hier.subcell_side(level));
        CHECK(diam <= (hier.lambda_at(level) / 4.0) * double(hier.cell_side(level)) + 1e-9);
    }
}

TEST_CASE("cluster point sets equal union of children clusters") {
    RawInstance inst = random_instance(30, 2, 23);
    Setup s = make_setup(inst, 0.5, 200.0);
    Hierarchy hier(s.cond, s.params);
    for (int ci = 0; ci < hier.num_cells(); ++ci) {
        const Cell& c = hier.cell(ci);
        if (c.level == 0) continue;
        for (const Cluster& cl : c.clusters) {
            std::set<int> unioned;
            int64_t sp = hier.subcell_side(c.level);
            for (int ch : c.children) {
                const Cell& cc = hier.cell(ch);
                int64_t sc = hier.subcell_side(cc.level);
                for (const Cluster& ccl : cc.clusters) {
                    if (ccl.color != cl.color) continue;
                    bool maps = true;
                    for (int i = 0; i < hier.dim(); ++i)
                        if (floordiv(ccl.sub[i] * sc, sp) != cl.sub[i]) maps = false;
                    if (maps) unioned.insert(ccl.pts.begin(), ccl.pts.end());
                }
            }
            std::set<int> own(cl.pts.begin(), cl.pts.end());
            CHECK(own == unioned);
        }
    }
}

TEST_CASE("smallest common cell level obeys the cover-level bounds") {
    RawInstance inst = random_instance(14, 2, 29);
    Setup s = make_setup(inst, 0.5, 100.0);
    Hierarchy hier(s.cond, s.params);
    int k = hier.k_shift();
    for (int i = 0; i < s.cond.n; ++i) {
        for (int j = 0; j < s.cond.n; ++j) {
            const PtI& p = hier.grid_a(i);
            const PtI& q = hier.grid_b(j);
            int cell = hier.smallest_common_cell(p, q);
            REQUIRE(cell >= 0);
            int level = hier.cell(cell).level;
            // brute-force course: scan all cells for the true minimum level
            int best = 1 << 20;
            for (int ci = 0; ci < hier.num_cells(); ++ci)
                if (hier.box_contains_point(ci, p) && hier.box_contains_point(ci, q))
                    best = std::min(best, hier.cell(ci).level);
            CHECK(level == best);
            double linf = double(linf_int(p, q, 2));
            double ell_level = double(int64_t(1) << (level + k));
            CHECK(linf <= ell_level + 1e-9);
            if (level >= 2) {
                double ell_m2 = double(int64_t(1) << (level - 2 + k));
                CHECK(ell_m2 <= linf + 1e-9);
            }
        }
    }
}

TEST_CASE("identical points meet at the bottom level") {
    RawInstance inst;
    inst.d = 2;
    inst.a = {pt2(10, 10), pt2(40, 10)};
    inst.b = {pt2(10, 30), pt2(40, 30)};
    Setup s = make_setup(inst, 0.5, 40.0);
    Hierarchy hier(s.cond, s.params);
    const PtI& p = hier.grid_a(0);
    int cell = hier.smallest_common_cell(p, p);
    REQUIRE(cell >= 0);
    CHECK(hier.cell(cell).level == 0);
}

TEST_CASE("affected cells cover exactly the membership cells") {
    RawInstance inst = random_instance(9, 2, 31);
    Setup s = make_setup(inst, 0.5, 70.0);
    Hierarchy hier(s.cond, s.params);
    CHECK(hier.affected_cells({}).empty());
    auto one = hier.affected_cells({{0, 0}});
    CHECK(int(one.size()) == (hier.height() + 1) * hier.families());
    // multi-point union check by brute force membership
    std::vector<std::pair<uint8_t, int>> pts = {{0, 0}, {1, 1}, {0, 2}};
    auto got = hier.affected_cells(pts);
    std::set<int> expect;
    for (auto [color, id] : pts)
        for (int ci = 0; ci < hier.num_cells(); ++ci)
            if (hier.box_contains_point(ci, hier.grid_pt(color, id))) expect.insert(ci);
    CHECK(got == expect);
}
