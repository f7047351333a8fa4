#include "geomatch/generate.hpp"

#include <cmath>
#include <stdexcept>

#include "geomatch/rng.hpp"

namespace geomatch {

RawInstance generate_instance(int n, int d, const std::string& dist, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("d must be in [1, 8]");
    RawInstance inst;
    inst.d = d;
    inst.a.assign(size_t(n), PtD{});
    inst.b.assign(size_t(n), PtD{});
    CounterRng rng{seed};
    uint64_t ctr = 0;

    if (dist == "uniform") {
        for (auto* pts : {&inst.a, &inst.b})
            for (auto& p : *pts)
                for (int i = 0; i < d; ++i) p[i] = 100.0 * rng.uniform(ctr++);
    } else if (dist == "clustered") {
        int k = int(std::ceil(std::sqrt(double(n))));
        std::vector<PtD> centers(size_t(k), PtD{});
        for (auto& c : centers)
            for (int i = 0; i < d; ++i) c[i] = 100.0 * rng.uniform(ctr++);
        for (auto* pts : {&inst.a, &inst.b}) {
            for (size_t j = 0; j < pts->size(); ++j) {
                const PtD& c = centers[size_t(rng.below(ctr++, uint64_t(k)))];
                for (int i = 0; i < d; ++i) {
                    // Box-Muller from two counter draws
                    double u1 = rng.uniform(ctr++);
                    double u2 = rng.uniform(ctr++);
                    if (u1 < 1e-300) u1 = 1e-300;
                    double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
                    (*pts)[j][i] = c[i] + 2.0 * g;
                }
            }
        }
    } else if (dist == "grid") {
        int64_t side = 2 * int64_t(std::ceil(std::pow(double(n), 1.0 / d)));
        if (side < 2) side = 2;
        for (auto* pts : {&inst.a, &inst.b})
            for (auto& p : *pts)
                for (int i = 0; i < d; ++i) p[i] = double(rng.below(ctr++, uint64_t(side)));
    } else {
        throw std::invalid_argument("unknown distribution: " + dist);
    }
    return inst;
}

}  // namespace geomatch
