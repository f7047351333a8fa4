#include "geomatch/solver.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <stdexcept>

#include "geomatch/conditioner.hpp"

namespace geomatch {

namespace {

double raw_cost(const RawInstance& inst, const std::vector<int>& match_a, Norm norm) {
    double c = 0.0;
    for (int i = 0; i < inst.n(); ++i) c += dist(inst.a[i], inst.b[size_t(match_a[i])], inst.d, norm);
    return c;
}

}  // namespace

SolveResult solve(const RawInstance& inst, double eps, const ConstantsConfig& cfg, Norm norm,
                  std::ostream* trace) {
    if (!(eps > 0.0) || eps > 1.0) throw std::invalid_argument("eps must be in (0, 1]");
    std::string err = inst.validate();
    if (!err.empty()) throw std::invalid_argument(err);

    SolveResult out;
    int n = inst.n();
    if (n == 0) return out;

    out.w0 = coarse_estimate(inst, norm).w0;
    if (out.w0 == 0.0) {
        // every component balanced by zero-length edges: pre-matching with
        // any beta consumes the entire instance
        ConditionedInstance cond = condition(inst, eps, 1.0);
        if (cond.n != 0) throw std::logic_error("w0 == 0 but pre-matching left points");
        out.match_a.assign(size_t(n), -1);
        for (auto [ra, rb] : cond.pre_matched) out.match_a[size_t(ra)] = rb;
        out.cost = raw_cost(inst, out.match_a, norm);
        return out;
    }

    int imax = int(std::ceil(2.0 * std::log2(double(std::max(2, n)))));
    double best = -1.0;
    std::vector<int> best_match;

    for (int i = -1; i <= imax; ++i) {
        double beta = std::ldexp(out.w0, i);
        BetaRunInfo info;
        info.beta = beta;
        if (best >= 0.0 && beta > 2.0 * best) {
            info.skipped = true;  // provably above the [OPT, 2*OPT] bracket
            out.runs.push_back(info);
            break;
        }
        std::vector<int> raw_match(size_t(n), -1);
        bool completed = false;
        try {
            ConditionedInstance cond = condition(inst, eps, beta);
            for (auto [ra, rb] : cond.pre_matched) raw_match[size_t(ra)] = rb;
            if (cond.n == 0) {
                completed = true;
            } else {
                DerivedParams params = derive_params(cfg, cond.n, cond.d, eps);
                Hierarchy hier(cond, params);
                Engine engine(hier, cfg, norm);
                if (trace) (*trace) << "# beta " << beta << "\n";
                MatcherResult mr = engine.run(trace);
                info.stats = mr.stats;
                if (std::getenv("GEOMATCH_PHASES")) {
                    const MatcherStats& st = mr.stats;
                    std::cerr << "beta=" << beta << (mr.ok ? " ok" : " abort") << " rounds="
                              << st.rounds << " repairs=" << st.repairs << " fw=" << st.fw_runs
                              << "/" << st.fw_ops << " walked=" << st.pairs_walked
                              << " rebuilt=" << st.pairs_rebuilt
                              << " reweighed=" << st.arcs_reweighed << " t_fw=" << st.t_fw
                              << " t_walk=" << st.t_walk << " t_rebuild=" << st.t_rebuild
                              << " t_reweigh=" << st.t_reweigh << " t_cand=" << st.t_candidates
                              << "\n";
                }
                if (mr.ok) {
                    for (int k = 0; k < cond.n; ++k)
                        raw_match[size_t(cond.raw_a[size_t(k)])] =
                            cond.raw_b[size_t(mr.match_a[size_t(k)])];
                    completed = true;
                }
            }
        } catch (const std::overflow_error&) {
            completed = false;  // conditioned lattice overflow for this guess
        }
        info.completed = completed;
        if (completed) {
            info.cost_raw = raw_cost(inst, raw_match, norm);
            if (best < 0.0 || info.cost_raw < best) {
                best = info.cost_raw;
                best_match = raw_match;
                out.winner = int(out.runs.size());
            }
        }
        out.runs.push_back(info);
    }
    if (best < 0.0)
        throw std::runtime_error("no perfect matching found within budget for any beta guess");
    out.match_a = std::move(best_match);
    out.cost = best;
    return out;
}

}  // namespace geomatch
