#pragma once

#include <cstdint>

#include "fort/special.hpp"

namespace fort {

// Counter-based generator: draw i of stream `key` is a pure function of
// (key, i), so replications can run on any thread schedule and still
// produce identical numbers. The output function is the splitmix64 mixer.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream key for replication `index` of a run keyed by `base`.
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  return mix64(mix64(base) + index);
}

class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key), counter_(0) {}

  uint64_t next_u64() {
    return mix64(key_ + 0x632be59bd9b4e019ULL * ++counter_);
  }

  // Uniform on (0,1): top 53 bits, offset half a step so 0 is excluded.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the inverse CDF; one draw per variate keeps the
  // counter accounting trivial. uniform() cannot hit the open endpoints,
  // so norm_quantile never throws here.
  double normal() { return norm_quantile(uniform()); }

  uint64_t counter() const { return counter_; }

 private:
  uint64_t key_;
  uint64_t counter_;
};

}  // namespace fort
