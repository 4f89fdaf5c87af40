#include "routebench/rng.hpp"

#include <cmath>

namespace routebench::rng {

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Stream::Stream(std::uint64_t seed, std::string_view label)
    : key_(splitmix64(seed ^ fnv1a64(label))) {}

std::uint64_t Stream::bits(std::uint64_t counter) const {
  return splitmix64(key_ + 0x632be59bd9b4e019ULL * (counter + 1));
}

double Stream::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

double Stream::normal(std::uint64_t counter) const {
  // u1 must be strictly positive for the log.
  double u1 = (static_cast<double>(bits(2 * counter) >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t Stream::below(std::uint64_t counter, std::uint64_t n) const {
  return bits(counter) % n;
}

}  // namespace routebench::rng
