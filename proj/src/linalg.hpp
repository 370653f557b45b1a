#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace specrange {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Sample mean / variance with the (n-1) denominator used throughout.
inline double sample_mean(const Eigen::Ref<const Vector>& v) {
    return v.mean();
}

inline double sample_variance(const Eigen::Ref<const Vector>& v) {
    const Index n = v.size();
    if (n < 2) return 0.0;
    const double m = v.mean();
    return (v.array() - m).square().sum() / static_cast<double>(n - 1);
}

// SplitMix64; used to derive per-stage seeds and deterministic jitter.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, const char* tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* p = tag; *p; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ h);
}

}  // namespace specrange
