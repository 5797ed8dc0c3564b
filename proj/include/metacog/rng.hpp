#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace metacog {

// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

// Derives a child seed from a master seed and a structural path (scene index,
// phase tag, particle index, ...). Children of distinct paths are independent
// regardless of how work is scheduled across threads.
std::uint64_t derive_seed(std::uint64_t seed, std::span<const std::uint64_t> path);

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return derive_seed(seed, std::span<const std::uint64_t>(path.begin(), path.size()));
}

// Deterministic random source. Every distribution is implemented here rather
// than via <random> adaptors, because std:: distribution output is
// implementation-defined and the engine must produce identical streams
// everywhere.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  // Independent generator for a sub-task addressed by `path`.
  Rng child(std::initializer_list<std::uint64_t> path) const;

  std::uint64_t next_u64();
  double uniform();                                  // [0, 1)
  double uniform(double lo, double hi);
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive
  bool bernoulli(double p);
  double normal(double mu, double sigma);
  double gamma(double shape, double rate);
  double beta(double alpha, double beta_param);
  long poisson(double mean);
  double truncated_normal(double mu, double sigma, double lo, double hi);
  // Index draw proportional to non-negative weights (need not be normalized).
  std::size_t categorical(std::span<const double> weights);
  std::vector<std::size_t> permutation(std::size_t n);

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace metacog
