#pragma once

#include <cstdint>

namespace geomatch {

// Counter-based generator: value i of stream `seed` is splitmix64(seed ^ golden*i).
// Stateless, so instances are reproducible across platforms and call orders.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct CounterRng {
    uint64_t seed = 0;
    uint64_t word(uint64_t counter) const {
        return splitmix64(seed ^ (counter * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    }
    // uniform in [0, 1)
    double uniform(uint64_t counter) const {
        return double(word(counter) >> 11) * 0x1.0p-53;
    }
    // uniform integer in [0, m)
    uint64_t below(uint64_t counter, uint64_t m) const { return word(counter) % m; }
};

}  // namespace geomatch
