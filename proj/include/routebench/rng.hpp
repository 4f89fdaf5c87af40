#pragma once

#include <cstdint>
#include <string_view>

namespace routebench::rng {

// 64-bit FNV-1a. Stable across platforms; used to derive stream keys
// from textual labels.
std::uint64_t fnv1a64(std::string_view text);

// SplitMix64 finalizer. Bijective mix of a 64-bit counter.
std::uint64_t splitmix64(std::uint64_t z);

// Counter-based generator. Every draw is a pure function of
// (seed, stream label, counter), so results are independent of call
// order, thread scheduling, and platform. A stream is typically keyed
// per (combo-modulo-transport, request index).
class Stream {
 public:
  Stream(std::uint64_t seed, std::string_view label);

  std::uint64_t bits(std::uint64_t counter) const;

  // Uniform in [0, 1), 53-bit resolution.
  double uniform(std::uint64_t counter) const;

  // Standard normal via Box-Muller; consumes counters 2k and 2k+1
  // internally so distinct `counter` values stay independent.
  double normal(std::uint64_t counter) const;

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const;

 private:
  std::uint64_t key_;
};

}  // namespace routebench::rng
