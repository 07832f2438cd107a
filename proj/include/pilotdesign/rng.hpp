#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace pilotdesign {

// Deterministic PRNG with explicit algorithms for every draw, so that output
// streams are identical across platforms and standard-library versions.
// The generator is SplitMix64; substreams are derived by hashing a master
// seed with a sequence of tags (see derive_seed / Rng::stream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (no cached spare, fixed consumption of
  // two uniforms per draw).
  double next_normal() {
    constexpr double two_pi = 6.283185307179586476925287;
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  int next_int(int lo, int hi_exclusive) {
    return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi_exclusive - lo)));
  }

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = next_below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t absorb(std::uint64_t h, std::string_view tag) {
  std::uint64_t fnv = 0xcbf29ce484222325ULL;
  for (const char c : tag) {
    fnv ^= static_cast<unsigned char>(c);
    fnv *= 0x100000001b3ULL;
  }
  h = absorb(h, fnv);
  return absorb(h, static_cast<std::uint64_t>(tag.size()));
}

}  // namespace detail

// Derives an independent stream seed from a master seed and a tag sequence,
// e.g. derive_seed(master, "noise", dataset_id, subject_id).
template <class... Parts>
std::uint64_t derive_seed(std::uint64_t master, Parts&&... parts) {
  std::uint64_t h = detail::mix64(master + 0x6a09e667f3bcc909ULL);
  ((h = detail::absorb(h, parts)), ...);
  return detail::mix64(h);
}

template <class... Parts>
Rng make_stream(std::uint64_t master, Parts&&... parts) {
  return Rng(derive_seed(master, std::forward<Parts>(parts)...));
}

}  // namespace pilotdesign
