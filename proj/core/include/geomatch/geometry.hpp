#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace geomatch {

// Dimension is a runtime parameter but bounded: the cover machinery is
// exponential in d (2^d shift families, 3^d children per cell).
inline constexpr int kMaxDim = 8;

enum class Norm { L2, L1, LInf };

struct PtD {
    std::array<double, kMaxDim> c{};
    double& operator[](int i) { return c[size_t(i)]; }
    double operator[](int i) const { return c[size_t(i)]; }
    bool operator==(const PtD&) const = default;
};

struct PtI {
    std::array<int64_t, kMaxDim> c{};
    int64_t& operator[](int i) { return c[size_t(i)]; }
    int64_t operator[](int i) const { return c[size_t(i)]; }
    bool operator==(const PtI&) const = default;
    auto operator<=>(const PtI&) const = default;
};

inline double dist(const PtD& a, const PtD& b, int d, Norm norm = Norm::L2) {
    double acc = 0.0;
    switch (norm) {
        case Norm::L2:
            for (int i = 0; i < d; ++i) {
                double t = a[i] - b[i];
                acc += t * t;
            }
            return std::sqrt(acc);
        case Norm::L1:
            for (int i = 0; i < d; ++i) acc += std::fabs(a[i] - b[i]);
            return acc;
        case Norm::LInf:
            for (int i = 0; i < d; ++i) acc = std::max(acc, std::fabs(a[i] - b[i]));
            return acc;
    }
    return acc;
}

inline double dist(const PtI& a, const PtI& b, int d, Norm norm = Norm::L2) {
    double acc = 0.0;
    switch (norm) {
        case Norm::L2:
            for (int i = 0; i < d; ++i) {
                double t = double(a[i] - b[i]);
                acc += t * t;
            }
            return std::sqrt(acc);
        case Norm::L1:
            for (int i = 0; i < d; ++i) acc += std::fabs(double(a[i] - b[i]));
            return acc;
        case Norm::LInf:
            for (int i = 0; i < d; ++i) acc = std::max(acc, std::fabs(double(a[i] - b[i])));
            return acc;
    }
    return acc;
}

inline int64_t linf_int(const PtI& a, const PtI& b, int d) {
    int64_t m = 0;
    for (int i = 0; i < d; ++i) m = std::max<int64_t>(m, std::llabs(a[i] - b[i]));
    return m;
}

// Floor division for possibly negative coordinates.
inline int64_t floordiv(int64_t a, int64_t b) {
    int64_t q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace geomatch
