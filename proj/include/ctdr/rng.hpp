#pragma once

#include <cmath>
#include <cstdint>

namespace ctdr {

// splitmix64 output step. Fully specified, so streams are identical across
// platforms and thread counts.
inline std::uint64_t splitmix64_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Sub-stream seed: the index is XOR-folded into the master seed and pushed
// through one splitmix64 step. Replication r of a study always sees
// derive_seed(master, r) no matter how many replications run or on how many
// threads.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64_mix(master ^ index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // [0, 1), 53-bit resolution; never returns 1.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Inverse-CDF draw; avoids log(0) because uniform() < 1.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

 private:
  std::uint64_t state_;
};

}  // namespace ctdr
