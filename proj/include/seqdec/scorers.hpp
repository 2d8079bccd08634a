#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "seqdec/attention.hpp"
#include "seqdec/distribution.hpp"
#include "seqdec/hypothesis.hpp"

namespace seqdec {

// Knobs of the composite decoding criterion.  The criterion is expressed
// as a maximized score, so LM, coverage and length all enter as bonuses.
struct ScoreConfig {
  double lm_weight = 0.0;           // lambda
  double coverage_weight = 0.0;     // gamma
  double coverage_threshold = 0.5;  // tau
  double length_bonus = 0.0;        // eta, per emitted token
  double temperature = 1.0;
  double eos_margin = 2.3;          // delta, nats; log of a ~10x probability ratio
  bool eos_gate_enabled = false;

  void validate() const {
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
    if (!(coverage_threshold > 0.0 && coverage_threshold < 1.0))
      throw std::invalid_argument("coverage threshold must be in (0,1)");
    if (lm_weight < 0.0 || coverage_weight < 0.0 || length_bonus < 0.0 || eos_margin < 0.0)
      throw std::invalid_argument("score weights must be non-negative");
  }
};

inline LogDistribution tempered_distribution(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& l : scaled) l /= temperature;
  return normalize_logits(scaled);
}

inline LogDistribution tempered_distribution(const std::vector<double>& logits, double t) {
  return tempered_distribution(std::span<const double>(logits), t);
}

// EOS may be emitted only when its log-probability is within `margin`
// nats of the most probable token.
inline bool eos_allowed(const LogDistribution& dist, double margin, int eos_index) {
  if (std::isinf(margin)) return true;
  const double best = dist.logp[static_cast<std::size_t>(dist.argmax())];
  return dist.logp[static_cast<std::size_t>(eos_index)] >= best - margin;
}

// model + lambda*LM + gamma*coverage + eta*length, larger is better.
// Updates the hypothesis breakdown in place.
inline double composite_score(Hypothesis& hyp, double lm_logp, const ScoreConfig& cfg) {
  hyp.breakdown.model = hyp.model_logp;
  hyp.breakdown.lm = cfg.lm_weight == 0.0 ? 0.0 : cfg.lm_weight * lm_logp;
  hyp.breakdown.coverage =
      cfg.coverage_weight == 0.0
          ? 0.0
          : cfg.coverage_weight * coverage(hyp.trace, cfg.coverage_threshold);
  hyp.breakdown.length = cfg.length_bonus * static_cast<double>(hyp.tokens.size());
  return hyp.breakdown.total();
}

}  // namespace seqdec
