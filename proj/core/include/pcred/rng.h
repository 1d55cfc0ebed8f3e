#ifndef PCRED_RNG_H_
#define PCRED_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace pcred {

// Seeded generator with platform-independent derived distributions.
// std::uniform_int_distribution and friends are implementation-defined, so
// split manifests and sampled candidates would differ across standard
// libraries; the helpers here only depend on mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pcred

#endif  // PCRED_RNG_H_
