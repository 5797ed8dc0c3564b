#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "metacog/diff.hpp"
#include "metacog/rng.hpp"
#include "metacog/types.hpp"

namespace metacog {

struct GammaParams {
  double alpha = 1.0, beta = 1.0;
};
struct BetaParams {
  double alpha = 1.0, beta = 1.0;
};

// Per-category conjugate state over detector parameters: Gamma over the
// Poisson hallucination rate, Beta over the geometric detection rate.
struct MetaBeliefs {
  std::vector<GammaParams> gamma_params;
  std::vector<BetaParams> beta_params;

  std::size_t size() const { return gamma_params.size(); }
  void validate() const;
};

MetaBeliefs prior_beliefs(std::size_t num_categories);
MetaBeliefs prior_beliefs(const CategoryTable& categories);

// Conjugate update from one scene's per-frame diffs. For each category:
// Gamma alpha += hallucinations, Gamma beta += num_frames;
// Beta alpha += matched detections over in-view events, Beta beta += events.
MetaBeliefs update_beliefs(const MetaBeliefs& beliefs, std::span<const DiffResult> diffs,
                           int num_frames);

Theta sample_theta(const MetaBeliefs& beliefs, Rng& rng);

// Posterior means; on prior_beliefs this is the frozen reference configuration
// (hallucination rate 1.0, detection rate 0.5).
Theta expected_theta(const MetaBeliefs& beliefs);

}  // namespace metacog
