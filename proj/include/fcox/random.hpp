#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fcox {

// Seeded generator with platform-independent output. The engine is
// std::mt19937_64 (its sequence is fixed by the standard); the distributions
// below are implemented here because the std:: ones are not portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 bits of precision.
    double uniform();

    // Uniform integer on [0, bound) by rejection sampling.
    std::uint64_t below(std::uint64_t bound);

    // Standard normal via Box-Muller (one draw per call; no caching).
    double normal();

    // Exponential with rate 1 by inversion.
    double exponential();

    // Fisher-Yates, drawing j = below(i + 1) for i = n-1 down to 1.
    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace fcox
