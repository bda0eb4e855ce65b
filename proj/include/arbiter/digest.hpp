#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace arbiter {

/// SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(std::string_view data);

/// Counter-based generator with a fully specified, platform-independent
/// output sequence. Used wherever byte-identical results across runs,
/// platforms, and worker scheduling are required.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();

    /// Uniform draw in [0, 1) with 53 bits of precision.
    double next_unit();

  private:
    std::uint64_t state_;
};

/// Deterministic draw in [0,1) derived from (seed, key), independent of any
/// shared RNG stream. Identical inputs give identical draws on every platform.
double keyed_unit_draw(std::int64_t seed, std::string_view key);

/// Generator seeded from (seed, key) for call sites needing several draws.
SplitMix64 keyed_generator(std::int64_t seed, std::string_view key);

}  // namespace arbiter
