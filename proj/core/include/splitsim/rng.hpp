#pragma once

#include <cstdint>
#include <vector>

namespace splitsim {

// Counter-based generator: output i is a pure function of (seed, stream, i).
// Draw order is therefore independent of process/partition layout, which is
// what keeps seeded workloads reproducible across instantiations.
class CounterRng {
 public:
  CounterRng() = default;
  CounterRng(uint64_t seed, uint64_t stream);

  uint64_t next_u64();
  // Uniform in [0, 1).
  double next_double();
  // Uniform in [0, n).
  uint64_t next_below(uint64_t n);
  // Exponentially distributed with the given mean, in the same unit.
  double next_exponential(double mean);

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

// Zipf(s) over ranks 1..n via inverse-CDF table lookup. Rank r has
// probability r^-s / H(n, s).
class ZipfSampler {
 public:
  ZipfSampler(double s, uint64_t n);

  // Returns a rank in [1, n].
  uint64_t sample(CounterRng& rng) const;
  double rank_mass(uint64_t rank) const;

 private:
  std::vector<double> cdf_;
  double norm_ = 0;
  double s_ = 0;
};

}  // namespace splitsim
