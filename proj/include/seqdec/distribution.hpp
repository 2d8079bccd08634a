#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace seqdec {

// A normalized distribution over the vocabulary, stored as natural-log
// probabilities.  Only ever produced by normalize_logits / tempered
// variants, so the normalization invariant holds by construction.
struct LogDistribution {
  std::vector<double> logp;

  std::size_t size() const { return logp.size(); }

  int argmax() const {
    return static_cast<int>(std::max_element(logp.begin(), logp.end()) - logp.begin());
  }

  double prob(int i) const { return std::exp(logp[static_cast<std::size_t>(i)]); }
};

inline void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

// log-softmax
inline LogDistribution normalize_logits(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("normalize_logits: empty logits");
  check_finite(logits, "normalize_logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  const double lse = m + std::log(sum);
  LogDistribution d;
  d.logp.reserve(logits.size());
  for (double l : logits) d.logp.push_back(l - lse);
  return d;
}

inline LogDistribution normalize_logits(const std::vector<double>& logits) {
  return normalize_logits(std::span<const double>(logits));
}

inline double entropy(const LogDistribution& d) {
  double h = 0.0;
  for (double lp : d.logp) {
    const double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return h;
}

}  // namespace seqdec
