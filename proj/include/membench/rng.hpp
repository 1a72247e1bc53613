#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace membench {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

// Seed derived from the bytes of a sample, so per-sample randomness does not
// depend on evaluation order.
std::uint64_t content_seed(std::uint64_t base, std::span<const double> values);

}  // namespace membench
