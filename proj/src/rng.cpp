#include "metacog/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace metacog {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::span<const std::uint64_t> path) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t v : path) {
    h = mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

Rng Rng::child(std::initializer_list<std::uint64_t> path) const {
  return Rng(derive_seed(seed_, std::span<const std::uint64_t>(path.begin(), path.size())));
}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("uniform: lo > hi");
  return lo + (hi - lo) * uniform();
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  const std::uint64_t n =
      static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  if (n == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit range
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / n * n;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % n);
}

bool Rng::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bernoulli: p must be in [0, 1]");
  return uniform() < p;
}

double Rng::normal(double mu, double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("normal: sigma must be non-negative");
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 0x1.0p-100) u1 = 0x1.0p-100;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mu + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("gamma: shape and rate must be positive");
  }
  if (shape < 1.0) {
    // Boost the shape, then scale by u^(1/shape).
    double u = uniform();
    if (u < 0x1.0p-100) u = 0x1.0p-100;
    const double g = gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    return g > 1e-300 ? g : 1e-300;
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal(0.0, 1.0);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) {
      const double g = d * v / rate;
      return g > 1e-300 ? g : 1e-300;
    }
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      const double g = d * v / rate;
      return g > 1e-300 ? g : 1e-300;
    }
  }
}

double Rng::beta(double alpha, double beta_param) {
  const double x = gamma(alpha, 1.0);
  const double y = gamma(beta_param, 1.0);
  double r = x / (x + y);
  if (r < 1e-12) r = 1e-12;
  if (r > 1.0 - 1e-12) r = 1.0 - 1e-12;
  return r;
}

long Rng::poisson(double mean) {
  if (mean < 0.0 || !std::isfinite(mean)) {
    throw std::invalid_argument("poisson: mean must be finite and non-negative");
  }
  if (mean == 0.0) return 0;
  if (mean > 30.0) {
    // Additivity keeps the inversion loop short for large means.
    return poisson(mean * 0.5) + poisson(mean * 0.5);
  }
  const double limit = std::exp(-mean);
  long k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform();
  } while (p > limit);
  return k - 1;
}

double Rng::truncated_normal(double mu, double sigma, double lo, double hi) {
  if (!(sigma > 0.0)) throw std::invalid_argument("truncated_normal: sigma must be positive");
  if (!(lo < hi)) throw std::invalid_argument("truncated_normal: lo must be < hi");
  for (int i = 0; i < 100000; ++i) {
    const double x = normal(mu, sigma);
    if (x > lo && x < hi) return x;
  }
  throw std::runtime_error("truncated_normal: rejection sampling failed to converge");
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("categorical: weights must be finite and non-negative");
    }
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("categorical: degenerate weights");
  const double u = uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    cum += weights[i];
    if (u < cum) return i;
  }
  return last_positive;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

}  // namespace metacog
