#include "fcox/random.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace fcox {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    // Largest multiple of bound that fits; values above it are rejected.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % bound;
}

double Rng::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::exponential() { return -std::log(1.0 - uniform()); }

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(idx));
    return idx;
}

}  // namespace fcox
