#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace dcsr {

/// Mixes a master seed with a path of indices (cell, sample, ...) into an
/// independent stream seed. Streams derived from distinct paths are
/// decorrelated, so parallel work stays reproducible regardless of order.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Seeded random stream: standard normals and uniforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  void fill_gaussian(std::span<double> out);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace dcsr
