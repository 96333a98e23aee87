#pragma once

#include <cstdint>
#include <vector>

namespace acrlab {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen because the recurrence is a
// dozen lines in any language, which keeps sampled subsets reproducible
// outside this codebase. State advances by the golden-gamma constant; each
// output is the finalized mix of the new state.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Draw in [0, bound). Plain modulo reduction, by definition: the tiny
    // bias is irrelevant at corpus scale and the rule stays one line in a
    // reimplementation.
    std::uint64_t bounded(std::uint64_t bound) { return next() % bound; }

private:
    std::uint64_t state_;
};

// Partial Fisher-Yates over indices 0..n-1: for i in [0, k), swap element i
// with element i + bounded(n - i); the first k elements are the sample, in
// draw order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           SplitMix64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

} // namespace acrlab
