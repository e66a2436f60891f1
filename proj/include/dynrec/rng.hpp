#pragma once

#include <cstdint>
#include <cmath>
#include <string>

namespace dynrec {

// Deterministic splitmix64 generator. Self-contained so that every reported
// number is a pure function of (seed, config, dataset) regardless of the
// standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform integer in [0, n); n must be > 0
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // derive an independent stream for a named purpose
    Rng fork(const std::string& tag) const {
        std::uint64_t h = 1469598103934665603ULL ^ state_;
        for (unsigned char c : tag) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return Rng(h);
    }

  private:
    std::uint64_t state_;
};

// FNV-1a 64-bit, used for content digests and run-directory names.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 14695981039346656037ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace dynrec
