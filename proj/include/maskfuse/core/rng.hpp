#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace maskfuse {

// Deterministic RNG. All transforms are spelled out on top of the raw
// mt19937_64 stream so a given seed yields the same values on every
// platform and compiler.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), u1 < 1
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(gen_()) * n) >> 64);
    }

    // Derives an independent child seed, used for per-index parallel work.
    static uint64_t derive(uint64_t seed, uint64_t index) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace maskfuse
