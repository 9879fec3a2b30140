#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "msar/errors.hpp"

namespace msar {

// splitmix64 finalizer; cheap and well mixed, used to derive stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(a) ^ (0x9e3779b97f4a7c15ULL + b));
}

// FNV-1a, used to fold string identifiers into stream keys.
inline std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/**
 * Random number handle.
 *
 * All sampling in the library goes through an explicit Rng so that results
 * are a pure function of (seed, inputs). Independent substreams are derived
 * from the construction seed, never from the current engine state, so work
 * split across threads by stream key produces the same draws as a serial
 * sweep.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Derived stream for (key_a, key_b, key_c); independent of how much this
  // handle has been consumed.
  Rng stream(std::uint64_t key_a, std::uint64_t key_b = 0,
             std::uint64_t key_c = 0) const {
    return Rng(mix_seed(mix_seed(mix_seed(seed_, key_a), key_b), key_c));
  }

  double uniform() {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(engine_);
  }

  double normal() {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(engine_);
  }

  // Gamma(shape, 1), shape > 0.
  double gamma(double shape) {
    if (!(shape > 0.0)) {
      throw NonPositiveConcentration("gamma shape must be positive, got " +
                                     std::to_string(shape));
    }
    std::gamma_distribution<double> d(shape, 1.0);
    return d(engine_);
  }

  double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof); }

  // Index draw proportional to non-negative weights (need not be normalized).
  int categorical(const Eigen::VectorXd& weights) {
    for (int i = 0; i < weights.size(); ++i) {
      if (weights[i] < 0.0) {
        throw InvalidArgument("categorical weight " + std::to_string(i) +
                              " is negative");
      }
    }
    const double total = weights.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw NumericalUnderflow("categorical weights sum to " +
                               std::to_string(total));
    }
    double u = uniform() * total;
    int last_positive = -1;
    for (int i = 0; i < weights.size(); ++i) {
      const double w = weights[i];
      if (w > 0.0) last_positive = i;
      u -= w;
      if (u < 0.0 && w > 0.0) return i;
    }
    // Rounding can leave u marginally non-negative after the walk.
    return last_positive;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace msar
