#pragma once

#include <cstdint>
#include <random>

namespace cods {

// Seeded RNG used everywhere determinism matters. std::mt19937_64 has a
// pinned algorithm in the standard, so sequences are reproducible across
// platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen_);
  }
  double gaussian(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }
  uint64_t next_u64() { return gen_(); }

  // Derive an independent stream, e.g. one per scene or worker.
  Rng fork() { return Rng(splitmix(gen_())); }

  std::mt19937_64& engine() { return gen_; }

  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cods
