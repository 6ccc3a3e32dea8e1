#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace basis {

// Deterministic RNG with named-stream derivation. One root seed per run;
// subsystems pull independent streams by name so adding a consumer never
// perturbs the draws seen by another. xoshiro256++ core, hand-rolled
// distributions (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Derive an independent stream keyed by (this stream's seed, name).
  Rng stream(std::string_view name) const;
  Rng stream(std::string_view name, uint64_t index) const;

  uint64_t next_u64();

  // uniform in [0,1) with 53 random mantissa bits
  double uniform();
  double uniform(double lo, double hi);
  // uniform integer in [0, n), n >= 1
  int uniform_int(int n);
  // standard normal (Box-Muller, cached pair)
  double normal();

  // index sampled according to probs (assumed nonnegative; normalized internally)
  int choice(std::span<const double> probs);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t root_seed() const { return seed_; }

 private:
  uint64_t seed_ = 0;
  uint64_t s_[4] = {0, 0, 0, 0};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// FNV-1a 64-bit hash; also used as the checkpoint payload checksum.
uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull);
uint64_t fnv1a64(std::string_view s);

}  // namespace basis
