#include "stam/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "stam/errors.hpp"

namespace stam {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 1469598103934665603ull;
    for (const char c : text) {
        hash ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        hash *= 1099511628211ull;
    }
    return hash;
}

std::uint64_t SplitRng::derive_seed(std::string_view label) const {
    return mix64(seed_ ^ (fnv1a64(label) * kGoldenGamma));
}

std::uint64_t SplitRng::next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
}

double SplitRng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitRng::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

double SplitRng::next_gaussian(double mean, double stddev) {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * radius * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SplitRng::next_below(std::uint64_t bound) {
    if (bound == 0) {
        throw DomainError("SplitRng::next_below: bound must be positive");
    }
    constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t overhang = (kMax % bound + 1) % bound;  // 2^64 mod bound
    while (true) {
        const std::uint64_t value = next_u64();
        if (value <= kMax - overhang) {
            return value % bound;
        }
    }
}

}  // namespace stam
