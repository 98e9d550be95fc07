#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cssr {

// Deterministic random source. All randomness in the library flows through
// this class so that runs are reproducible bit-for-bit across platforms:
// the raw stream comes from std::mt19937_64 (whose output sequence is fixed
// by the standard) and the real-valued transforms below are hand-rolled
// instead of using std::uniform_real_distribution / std::normal_distribution,
// whose outputs are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n). Modulo bias is below 2^-32 for any n that
  // fits an int, which is irrelevant at the sample counts used here.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  // Standard normal via Box-Muller. Consumes exactly two draws per call and
  // keeps no cached spare, so the consumption pattern is easy to reason about
  // when replaying streams.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Derives an independent stream seed from (seed, stream). Used for
  // per-iteration / per-image substreams so that resuming a run at iteration
  // k reproduces the exact draws of a run that never stopped, without having
  // to persist generator state. splitmix64 finalizer.
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cssr
