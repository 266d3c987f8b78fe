#pragma once

#include <cmath>
#include <cstdint>

namespace tstcc {

// Counter-based splittable random stream (splitmix64 finalizer). Every draw is
// a pure function of (key, counter), so streams can be copied, replayed, and
// handed to parallel workers without shared state.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : key_(finalize(seed ^ kGolden)) {}

    // Derives an independent stream; the parent is unchanged.
    RngStream split(uint64_t tag) const {
        return RngStream(finalize(key_ ^ finalize(tag ^ 0xA5A5A5A55A5A5A5AULL)), 0);
    }

    uint64_t next_u64() { return finalize(key_ + (++counter_) * kGolden); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t bound = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= bound);
        return x % n;
    }

private:
    RngStream(uint64_t key, uint64_t counter) : key_(key), counter_(counter) {}

    static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    static uint64_t finalize(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t key_ = 0;
    uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace tstcc
