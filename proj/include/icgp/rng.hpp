#pragma once

#include <cstdint>

namespace icgp {

// Counter-based generator: output k of (seed, stream) is a fixed mixing
// function of the three integers, so draws do not depend on thread count or
// on how many other streams were consumed. Uniforms and normals are derived
// with explicit formulas rather than <random> distributions, whose output
// differs between standard library implementations.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  // Integer uniform on [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace icgp
