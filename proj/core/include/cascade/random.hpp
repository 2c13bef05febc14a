#pragma once

// Reproducible randomness. One 64-bit seed per run; every stochastic
// component draws from its own stream, and every sample inside a stream has
// its own generator keyed by (seed, stream, index). Results therefore do not
// depend on evaluation order or thread count.

#include <cstdint>
#include <random>

namespace cascade {

enum class Stream : std::uint64_t {
    Basin = 1,
    GradientLike = 2,
    GrowthX = 3,
    GrowthY = 4,
    CoverLattice = 5,
    Envelope = 6,
    Comparison = 7,
    Perturbation = 8,
    Quotient = 9,
};

/// SplitMix64 finalizer applied to the packed triple.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                        std::uint64_t index) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, Stream stream, std::uint64_t index)
        : engine_(derive_seed(seed, static_cast<std::uint64_t>(stream), index)) {}

    /// Uniform in [0, 1).
    double uniform() { return std::generate_canonical<double, 53>(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace cascade
