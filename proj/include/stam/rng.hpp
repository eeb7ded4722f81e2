#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace stam {

/// FNV-1a over the bytes of `text`; used for label hashing and config hashes.
std::uint64_t fnv1a64(std::string_view text);

/// Deterministic splittable PRNG used everywhere randomness is needed.
///
/// The core is splitmix64. A stream is identified by its construction seed;
/// `split(label)` derives an independent child stream from that identity and
/// a label hash without advancing the parent, so the numbers a component
/// draws never depend on what other components drew before it.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    /// Child stream seed for `label`; parent state is untouched.
    std::uint64_t derive_seed(std::string_view label) const;

    SplitRng split(std::string_view label) const { return SplitRng(derive_seed(label)); }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double();

    double next_uniform(double lo, double hi);

    /// Box-Muller; two uniform draws per call, no cached spare.
    double next_gaussian(double mean, double stddev);

    /// Uniform integer in {0, ..., bound-1}, rejection-sampled to avoid bias.
    std::uint64_t next_below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace stam
