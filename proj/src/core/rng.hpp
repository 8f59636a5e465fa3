#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lfb {

// mt19937_64 with fixed output transforms. std::uniform_real_distribution and
// std::normal_distribution are implementation-defined, so reproducibility
// across standard libraries requires rolling the (tiny) transforms ourselves.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // Uniform in [0, 1): top 53 bits of the engine output.
    double uniform01() { return double(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; second deviate cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01(), u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Integer in [lo, hi] inclusive.
    std::int64_t randint(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = std::uint64_t(hi - lo) + 1;
        return lo + std::int64_t(eng_() % span);
    }

    // Derive an independent child stream; used to give submodules their own
    // seeds without coupling their draw counts.
    std::uint64_t fork_seed() { return eng_() ^ 0x9e3779b97f4a7c15ull; }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace lfb
