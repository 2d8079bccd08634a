#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "seqdec/distribution.hpp"
#include "seqdec/vocabulary.hpp"

namespace seqdec {

// Target label distribution for one transcript position; a proper
// distribution over the vocabulary.
struct TargetDistribution {
  std::vector<double> probs;
};

struct SmoothingScheme {
  enum class Kind { hard, uniform, unigram, neighborhood };

  Kind kind = Kind::hard;
  double beta = 1.0;  // mass on the correct label
  // (offset, weight) pairs; the defaults encode the +-1/+-2 neighbors at a 5:2 ratio.
  std::vector<std::pair<int, double>> neighbors = {{-2, 2.0}, {-1, 5.0}, {1, 5.0}, {2, 2.0}};
  std::vector<double> marginals;  // unigram kind only

  void validate(std::size_t vocab_size) const {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must be in (0,1]");
    if (kind == Kind::neighborhood) {
      std::set<int> seen;
      for (const auto& [off, w] : neighbors) {
        if (off == 0) throw std::invalid_argument("neighbor offset must be nonzero");
        if (!(w > 0.0)) throw std::invalid_argument("neighbor weight must be positive");
        if (!seen.insert(off).second) throw std::invalid_argument("duplicate neighbor offset");
      }
    }
    if (kind == Kind::unigram) {
      if (marginals.size() != vocab_size)
        throw std::invalid_argument("marginals must cover the vocabulary");
      double sum = 0.0;
      for (double m : marginals) {
        if (m < 0.0) throw std::invalid_argument("marginals must be non-negative");
        sum += m;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("marginals must sum to 1");
    }
  }
};

// T(y_i, .) for one position.  Uniform and unigram use the mixture form
// beta*onehot + (1-beta)*base; neighborhood splits the 1-beta mass over
// in-range transcript neighbors, renormalized, with colliding vocabulary
// tokens accumulating.
inline TargetDistribution target_distribution(const SmoothingScheme& scheme,
                                              std::span<const int> transcript,
                                              std::size_t position,
                                              const Vocabulary& vocab) {
  scheme.validate(vocab.size());
  if (position >= transcript.size())
    throw std::out_of_range("target_distribution: position out of range");
  const std::size_t v = vocab.size();
  for (int t : transcript)
    if (t < 0 || static_cast<std::size_t>(t) >= v)
      throw std::invalid_argument("transcript token out of vocabulary");

  TargetDistribution out;
  out.probs.assign(v, 0.0);
  const int correct = transcript[position];
  const double beta = scheme.beta;

  switch (scheme.kind) {
    case SmoothingScheme::Kind::hard:
      out.probs[static_cast<std::size_t>(correct)] = 1.0;
      break;
    case SmoothingScheme::Kind::uniform: {
      const double base = (1.0 - beta) / static_cast<double>(v);
      for (double& p : out.probs) p = base;
      out.probs[static_cast<std::size_t>(correct)] += beta;
      break;
    }
    case SmoothingScheme::Kind::unigram: {
      for (std::size_t i = 0; i < v; ++i) out.probs[i] = (1.0 - beta) * scheme.marginals[i];
      out.probs[static_cast<std::size_t>(correct)] += beta;
      break;
    }
    case SmoothingScheme::Kind::neighborhood: {
      double weight_sum = 0.0;
      for (const auto& [off, w] : scheme.neighbors) {
        const long long pos = static_cast<long long>(position) + off;
        if (pos >= 0 && pos < static_cast<long long>(transcript.size())) weight_sum += w;
      }
      out.probs[static_cast<std::size_t>(correct)] = beta;
      if (weight_sum > 0.0 && beta < 1.0) {
        for (const auto& [off, w] : scheme.neighbors) {
          const long long pos = static_cast<long long>(position) + off;
          if (pos < 0 || pos >= static_cast<long long>(transcript.size())) continue;
          const int tok = transcript[static_cast<std::size_t>(pos)];
          out.probs[static_cast<std::size_t>(tok)] += (1.0 - beta) * w / weight_sum;
        }
      } else {
        // no in-range neighbor (e.g. length-1 transcript): everything on the correct token
        out.probs[static_cast<std::size_t>(correct)] = 1.0;
      }
      break;
    }
  }
  return out;
}

// Relative token frequencies with an add-one floor.
inline std::vector<double> estimate_marginals(const std::vector<std::vector<int>>& corpus,
                                              const Vocabulary& vocab) {
  if (corpus.empty()) throw std::invalid_argument("estimate_marginals: empty corpus");
  const std::size_t v = vocab.size();
  std::vector<double> counts(v, 1.0);
  double total = static_cast<double>(v);
  for (const auto& seq : corpus) {
    for (int t : seq) {
      if (t < 0 || static_cast<std::size_t>(t) >= v)
        throw std::invalid_argument("corpus token out of vocabulary");
      counts[static_cast<std::size_t>(t)] += 1.0;
      total += 1.0;
    }
  }
  for (double& c : counts) c /= total;
  return counts;
}

// Eq.-style cross entropy: -sum_i sum_c T_i(c) log p_i(c), in nats.
inline double sequence_loss(const std::vector<TargetDistribution>& targets,
                            const std::vector<LogDistribution>& predictions) {
  if (targets.size() != predictions.size())
    throw std::invalid_argument("sequence_loss: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].probs.size() != predictions[i].logp.size())
      throw std::invalid_argument("sequence_loss: vocabulary mismatch");
    for (std::size_t c = 0; c < targets[i].probs.size(); ++c) {
      const double t = targets[i].probs[c];
      if (t != 0.0) loss -= t * predictions[i].logp[c];
    }
  }
  return loss;
}

// Exact gradient of the per-position cross entropy w.r.t. the logits:
// softmax(logits) - target.
inline std::vector<double> loss_gradient_logits(std::span<const double> logits,
                                                const TargetDistribution& target) {
  if (logits.size() != target.probs.size())
    throw std::invalid_argument("loss_gradient_logits: size mismatch");
  LogDistribution d = normalize_logits(logits);
  std::vector<double> grad(logits.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = std::exp(d.logp[i]) - target.probs[i];
  return grad;
}

inline std::vector<double> loss_gradient_logits(const std::vector<double>& logits,
                                                const TargetDistribution& target) {
  return loss_gradient_logits(std::span<const double>(logits), target);
}

}  // namespace seqdec
