#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mtal/common.hpp"

namespace mtal {

// Seeded randomness with a fully pinned algorithm so that a seed means the
// same byte stream on every platform. The raw generator is std::mt19937_64
// (bit-exact everywhere by the standard); everything derived from it
// (bounded ints, shuffles, gaussians) is implemented here because the
// standard library distributions are not portable across implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform integer in [0, bound) via rejection sampling on the top range.
    std::uint64_t next_below(std::uint64_t bound) {
        require(bound > 0, "Rng::next_below: bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % bound;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Standard normal via Box-Muller; one cached value per pair.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Fisher-Yates; the first n elements afterwards are a uniform sample
    // without replacement.
    template <typename T>
    void partial_shuffle(std::vector<T>& items, std::size_t n) {
        const std::size_t count = std::min(n, items.size());
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(next_below(items.size() - i));
            std::swap(items[i], items[j]);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (!items.empty()) partial_shuffle(items, items.size());
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derives independent sub-seeds from one master seed (splitmix64 steps), so
// each consumer of randomness gets its own stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace mtal
