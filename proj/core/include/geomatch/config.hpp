#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace geomatch {

enum class Mode { Theory, Practical };

// Tunable constant family c0..c5 plus run policies. The theory preset keeps
// the full inequality chain (c1 >= 8*c0, c4 >= 2*c0*sqrt(d), c5 >= 64,
// c0 >= c3*c4*c5/c2); the practical preset keeps the same ratios where they
// are cheap and floors the penalty so per-cell cluster counts stay bounded.
struct ConstantsConfig {
    Mode mode = Mode::Practical;
    double c0 = 1.0;
    double c1 = 8.0;
    double c2 = 1.0;
    double c3 = 1.0;
    double c4 = 0.0;  // 0 means "2*sqrt(d)", resolved at derive time
    double c5 = 1.0;
    double budget_c = 64.0;   // augment-step budget multiplier per beta guess
    double cancel_c = 16.0;   // cancellation budget multiplier per run
    // Practical mode coarsens crowded levels once instances outgrow the
    // oracle-checked regime; below cap_exempt_n the full fine-grained
    // structure is kept (cluster occupancy is bounded by the point count).
    int cluster_cap = 96;     // max clusters per cell when capping (0 = never cap)
    int cap_exempt_n = 128;   // instances up to this size are never capped
    bool trace = false;
    int audit = 0;            // 0 off, 1 cheap audits, 2 full (test sizes only)

    static ConstantsConfig theory() {
        ConstantsConfig c;
        c.mode = Mode::Theory;
        c.c0 = 1.0;
        c.c1 = 8.0;
        c.c3 = 1.0;
        c.c5 = 64.0;
        // c2 = 128*sqrt(d), c4 = 2*sqrt(d) resolved at derive time
        c.c2 = 0.0;
        c.c4 = 0.0;
        c.cluster_cap = 0;
        return c;
    }
    static ConstantsConfig practical() {
        ConstantsConfig c;
        if (const char* env = std::getenv("GEOMATCH_CLUSTER_CAP")) c.cluster_cap = std::atoi(env);
        return c;
    }
};

// Parameters derived from (config, n, d, eps) once per matcher run.
struct DerivedParams {
    int n = 0;
    int d = 0;
    double eps = 0.0;
    double c0 = 1.0, c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0, c5 = 1.0;
    double eps_bar = 0.0;    // eps / c1
    double eps_under = 0.0;  // eps_bar / (c2 * ceil(log2 n))
    double lambda = 0.0;     // penalty (formula value; levels may coarsen)
    int tau = 1;             // level offset between cells and subcells
    int cluster_cap = 0;     // 0 = uncapped
    int h_formula = 1;       // c3 * ceil(log2 n)
    double adj_coeff = 0.0;  // c0 * eps_under, the MES-level regularizer
    double adj_coeff_bar = 0.0;  // c0 * eps_bar, used by oracles/tests
    int64_t step_budget = 0;
    int64_t cancel_budget = 0;
};

inline int ceil_log2(int64_t n) {
    int k = 0;
    while ((int64_t(1) << k) < n) ++k;
    return k;
}

inline DerivedParams derive_params(const ConstantsConfig& cfg, int n, int d, double eps) {
    if (!(eps > 0.0) || eps > 1.0) throw std::invalid_argument("eps must be in (0, 1]");
    if (d < 1 || d > 8) throw std::invalid_argument("dimension must be in [1, 8]");
    DerivedParams p;
    p.n = n;
    p.d = d;
    p.eps = eps;
    double sd = std::sqrt(double(d));
    p.c0 = cfg.c0;
    p.c1 = cfg.c1;
    p.c2 = cfg.c2 > 0.0 ? cfg.c2 : (cfg.mode == Mode::Theory ? 128.0 * sd : 1.0);
    p.c3 = cfg.c3;
    p.c4 = cfg.c4 > 0.0 ? cfg.c4 : 2.0 * sd;
    p.c5 = cfg.c5;

    int logn = std::max(1, ceil_log2(std::max(2, n)));
    p.eps_bar = eps / p.c1;
    p.eps_under = p.eps_bar / (p.c2 * logn);
    p.lambda = p.c4 * p.eps_under;
    if (cfg.mode == Mode::Theory) {
        if (p.c1 < 8.0 * p.c0 || p.c4 < 2.0 * p.c0 * sd || p.c5 < 64.0 ||
            p.c0 < p.c3 * p.c4 * p.c5 / p.c2) {
            throw std::invalid_argument("theory-mode constants violate the required inequalities");
        }
    } else if (n > cfg.cap_exempt_n) {
        // practical mode coarsens crowded levels so per-cell cluster counts
        // stay bounded (the per-level penalty grows in step, keeping the
        // expansion-inequality derivation intact level by level)
        p.cluster_cap = cfg.cluster_cap;
    }
    p.tau = std::max(1, int(std::ceil(std::log2(4.0 * sd / p.lambda))));
    p.h_formula = std::max(1, int(std::ceil(p.c3 * logn)));
    p.adj_coeff = p.c0 * p.eps_under;
    p.adj_coeff_bar = p.c0 * p.eps_bar;
    double logn2 = double(logn) * double(logn);
    p.step_budget = int64_t(cfg.budget_c * double(n) * logn2 / (eps * eps)) + 16;
    p.cancel_budget = int64_t(cfg.cancel_c * double(n) * logn2 / (eps * eps)) + 16;
    return p;
}

}  // namespace geomatch
