#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gridtopo {

// Base error for everything raised by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input files (grid, chronic, config, action sets).
struct SchemaError : Error {
  explicit SchemaError(const std::string& msg) : Error(msg) {}
};

// Two objects that must share a grid / element order do not.
struct StructuralMismatchError : Error {
  explicit StructuralMismatchError(const std::string& msg) : Error(msg) {}
};

// API used against its stated preconditions (step after done, loadings on a
// non-converged solution, ...).
struct ContractViolation : Error {
  explicit ContractViolation(const std::string& msg) : Error(msg) {}
};

// 64-bit FNV-1a. Used for canonical topology digests; must stay stable across
// platforms and releases, so it is spelled out here instead of std::hash.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), seed);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic, platform-independent RNG. std::mt19937_64 has a portable
// engine but the standard distributions are implementation-defined, so the
// uniform/normal draws are hand-rolled on top of the raw 64-bit stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(splitmix64(seed ^ 0x6a09e667f3bcc908ULL)) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_ + 0x9e3779b97f4a7c15ULL);
    return state_;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0. Tiny modulo bias is acceptable
  // here; determinism is what matters.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (single draw, second value discarded to
  // keep the stream position independent of call pattern).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace gridtopo
