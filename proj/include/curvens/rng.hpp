#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace curvens {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Mixes a base seed with a string key and an index into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index = 0);

// mt19937_64 is fully specified by the standard; the distributions below are
// hand-rolled so that streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace curvens
