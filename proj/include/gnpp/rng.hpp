#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace gnpp {

// SplitMix64 stream. All randomness in the project (init, shuffling, dropout,
// augmentation) goes through this type so that a run is reproducible from its
// seed, independent of the standard library's distribution implementations.
struct Rng {
    std::uint64_t state = 0x9e3779b97f4a7c15ull;

    explicit Rng(std::uint64_t seed = 0) { state = seed + 0x9e3779b97f4a7c15ull; }

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, bound). Modulo bias is irrelevant at our scales.
    std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

    // Standard normal via Box-Muller; one spare value cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v;
        do {
            u = uniform01();
        } while (u <= 0.0);
        v = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = r * std::sin(two_pi * v);
        has_spare_ = true;
        return r * std::cos(two_pi * v);
    }

private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Fisher-Yates; order depends only on the rng state.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = std::size_t(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace gnpp
