#pragma once

#include <vector>

#include "seqdec/attention.hpp"

namespace seqdec {

// Per-term contributions to the composite beam-search score.  Each field
// already carries its weight, so total() is a plain sum.
struct ScoreBreakdown {
  double model = 0.0;
  double lm = 0.0;
  double coverage = 0.0;
  double length = 0.0;

  double total() const { return model + lm + coverage + length; }
};

struct Hypothesis {
  std::vector<int> tokens;  // EOS-terminated iff finished
  double model_logp = 0.0;
  double lm_logp = 0.0;
  AttentionTrace trace;
  bool finished = false;
  ScoreBreakdown breakdown;

  std::size_t length() const { return tokens.size(); }
};

}  // namespace seqdec
