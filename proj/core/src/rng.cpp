#include "splitsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splitsim {

namespace {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

CounterRng::CounterRng(uint64_t seed, uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream))) {}

uint64_t CounterRng::next_u64() { return splitmix64(key_ ^ counter_++); }

double CounterRng::next_double() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t CounterRng::next_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_below(0)");
  return next_u64() % n;
}

double CounterRng::next_exponential(double mean) {
  double u = next_double();
  // Avoid log(0); clamp to the smallest representable draw.
  if (u >= 1.0) u = std::nextafter(1.0, 0.0);
  return -mean * std::log1p(-u);
}

ZipfSampler::ZipfSampler(double s, uint64_t n) : s_(s) {
  if (n == 0) throw std::invalid_argument("zipf over empty key space");
  cdf_.resize(n);
  double acc = 0;
  for (uint64_t r = 1; r <= n; r++) {
    acc += std::pow(static_cast<double>(r), -s);
    cdf_[r - 1] = acc;
  }
  norm_ = acc;
  for (auto& v : cdf_) v /= norm_;
  cdf_.back() = 1.0;
}

uint64_t ZipfSampler::sample(CounterRng& rng) const {
  double u = rng.next_double();
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<uint64_t>(it - cdf_.begin()) + 1;
}

double ZipfSampler::rank_mass(uint64_t rank) const {
  return std::pow(static_cast<double>(rank), -s_) / norm_;
}

}  // namespace splitsim
