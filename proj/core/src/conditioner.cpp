#include "geomatch/conditioner.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace geomatch {

ConditionedInstance condition(const RawInstance& inst, double eps, double beta) {
    if (!(eps > 0.0) || eps > 1.0) throw std::invalid_argument("eps must be in (0, 1]");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    std::string err = inst.validate();
    if (!err.empty()) throw std::invalid_argument(err);

    int n = inst.n();
    int d = inst.d;
    ConditionedInstance out;
    out.d = d;
    out.sigma = 8.0 * std::sqrt(double(d)) * double(n) / (eps * beta);

    auto round_pt = [&](const PtD& p) {
        PtI q{};
        for (int i = 0; i < d; ++i) {
            double v = p[i] * out.sigma;
            if (std::fabs(v) > 4.0e15)
                throw std::overflow_error("conditioned coordinate overflows the integer lattice");
            q[i] = int64_t(std::floor(v + 0.5));  // half-up
        }
        return q;
    };

    std::vector<PtI> ia(n), ib(n);
    for (int i = 0; i < n; ++i) ia[i] = round_pt(inst.a[i]);
    for (int i = 0; i < n; ++i) ib[i] = round_pt(inst.b[i]);

    // group per lattice point and pre-match co-located opposite pairs in
    // index order
    std::map<PtI, std::pair<std::vector<int>, std::vector<int>>> sites;
    for (int i = 0; i < n; ++i) sites[ia[i]].first.push_back(i);
    for (int i = 0; i < n; ++i) sites[ib[i]].second.push_back(i);

    std::vector<char> gone_a(n, 0), gone_b(n, 0);
    for (auto& [pt, lists] : sites) {
        auto& [as, bs] = lists;
        size_t k = std::min(as.size(), bs.size());
        for (size_t t = 0; t < k; ++t) {
            out.pre_matched.push_back({as[t], bs[t]});
            gone_a[as[t]] = 1;
            gone_b[bs[t]] = 1;
        }
    }
    for (int i = 0; i < n; ++i) {
        if (!gone_a[i]) {
            out.raw_a.push_back(i);
            out.a.push_back(ia[i]);
        }
    }
    for (int i = 0; i < n; ++i) {
        if (!gone_b[i]) {
            out.raw_b.push_back(i);
            out.b.push_back(ib[i]);
        }
    }
    out.n = int(out.a.size());
    return out;
}

}  // namespace geomatch
