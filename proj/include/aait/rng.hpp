#ifndef AAIT_RNG_HPP
#define AAIT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace aait {

// splitmix64 stream. All randomness in the toolkit flows through explicitly
// seeded instances of this so runs are reproducible across platforms; the
// standard <random> distributions are implementation-defined and are not used.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1), safe for log()
  double uniform_open() {
    double u = uniform();
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    double u1 = uniform_open();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream; used to give workers their own sequences.
  Rng spawn(uint64_t tag) {
    Rng child(state_ ^ (0x6a09e667f3bcc909ull + tag * 0x9e3779b97f4a7c15ull));
    child.next_u64();
    return child;
  }

 private:
  uint64_t state_;
};

}  // namespace aait

#endif
