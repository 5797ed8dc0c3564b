#include "metacog/types.hpp"

#include <set>
#include <stdexcept>

namespace metacog {

Vec3 Vec3::normalized() const {
  const double n = norm();
  if (!(n > 0.0)) throw std::invalid_argument("normalized: zero-length vector");
  return {x / n, y / n, z / n};
}

std::optional<std::size_t> CategoryTable::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

void CategoryTable::validate() const {
  if (names.empty()) throw std::invalid_argument("category table must have at least one label");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw std::invalid_argument("duplicate category label: " + n);
    }
  }
}

CategoryTable CategoryTable::standard() {
  return CategoryTable{{"potted plant", "chair", "bowl", "tv", "umbrella"}};
}

void Theta::validate() const {
  if (halluc_rates.size() != det_rates.size()) {
    throw std::invalid_argument("theta: rate vectors must have equal length");
  }
  for (double l : halluc_rates) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw std::invalid_argument("theta: hallucination rates must be finite and >= 0");
    }
  }
  for (double p : det_rates) {
    if (!(p >= 0.0) || !(p < 1.0)) {
      throw std::invalid_argument("theta: detection rates must lie in [0, 1)");
    }
  }
}

}  // namespace metacog
