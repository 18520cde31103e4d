#pragma once

#include <cstdint>
#include <iterator>

namespace qgrl {

// xoshiro256** seeded through splitmix64. Pinned so that identical seeds
// give identical streams on every platform; std:: distributions are avoided
// for the same reason.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double next_double();
  double uniform(double lo, double hi);
  // Uniform in [0, n); n must be positive.
  int next_int(int n);

  template <class It>
  void shuffle(It first, It last) {
    auto n = std::distance(first, last);
    for (auto i = n - 1; i > 0; --i) {
      auto j = next_int(static_cast<int>(i) + 1);
      std::swap(*(first + i), *(first + j));
    }
  }

 private:
  uint64_t s_[4];
};

}  // namespace qgrl
