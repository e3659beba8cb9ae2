#pragma once

#include <cmath>
#include <cstdint>

#include "wedgefill/grid.hpp"

namespace wedgefill {

// Counter-based generator: output i depends only on (seed, i), so streams can
// be split deterministically and replayed from any point.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(mix(seed ^ 0x2545F4914F6CDD1DULL)) {}

    // Independent stream derived from this seed and a stream id.
    Rng derive(uint64_t stream) const { return Rng(seed_ ^ mix(stream + 0x9E3779B97F4A7C15ULL)); }

    uint64_t next_u64() { return mix(seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    // Uniform in (0, 1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // i in [0, n)
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    void fill_normal(Grid& g) {
        for (double& x : g.v) x = normal();
    }

    static uint64_t mix(uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    uint64_t seed_;
    uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace wedgefill
