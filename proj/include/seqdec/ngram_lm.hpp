#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqdec/distribution.hpp"
#include "seqdec/vocabulary.hpp"

namespace seqdec {

enum class LmSmoothing { add_k, stupid_backoff };

inline std::string to_string(LmSmoothing s) {
  return s == LmSmoothing::add_k ? "add_k" : "stupid_backoff";
}

inline LmSmoothing lm_smoothing_from_string(const std::string& s) {
  if (s == "add_k") return LmSmoothing::add_k;
  if (s == "stupid_backoff") return LmSmoothing::stupid_backoff;
  throw std::invalid_argument("unknown smoothing: " + s);
}

// Character-level backoff n-gram model over token indices.  Conditional
// distributions are renormalized so every context yields a proper
// distribution with strictly positive probabilities.  Immutable after
// training.
class CharNGramLM {
 public:
  static constexpr int kFormatVersion = 1;

  // Corpus sequences must include the terminal EOS token.
  static CharNGramLM train(const std::vector<std::vector<int>>& corpus,
                           const Vocabulary& vocab, int order,
                           LmSmoothing smoothing = LmSmoothing::add_k,
                           double k = 1.0, double alpha = 0.4) {
    if (corpus.empty()) throw std::invalid_argument("ngram train: empty corpus");
    if (order < 1) throw std::invalid_argument("ngram train: order must be >= 1");
    if (smoothing == LmSmoothing::add_k && !(k > 0.0))
      throw std::invalid_argument("ngram train: k must be > 0");
    if (smoothing == LmSmoothing::stupid_backoff && !(alpha > 0.0 && alpha <= 1.0))
      throw std::invalid_argument("ngram train: alpha must be in (0,1]");

    CharNGramLM lm(vocab, order, smoothing, k, alpha);
    const int v = static_cast<int>(vocab.size());
    for (const auto& seq : corpus) {
      for (int t : seq)
        if (t < 0 || t >= v) throw std::invalid_argument("ngram train: token out of vocabulary");
      for (std::size_t i = 0; i < seq.size(); ++i) {
        const int tok = seq[i];
        const int max_ctx = std::min<int>(order - 1, static_cast<int>(i));
        for (int m = 0; m <= max_ctx; ++m) {
          std::vector<int> ctx(seq.begin() + (static_cast<long>(i) - m), seq.begin() + static_cast<long>(i));
          auto& counts = lm.counts_[static_cast<std::size_t>(m)][ctx];
          if (counts.empty()) counts.assign(static_cast<std::size_t>(v), 0);
          counts[static_cast<std::size_t>(tok)] += 1;
        }
      }
    }
    return lm;
  }

  int order() const { return order_; }
  const Vocabulary& vocab() const { return vocab_; }

  // Conditional distribution for the next token given a context,
  // using the longest stored context suffix with backoff.
  LogDistribution next_logp(std::span<const int> context) const {
    const std::size_t v = vocab_.size();
    for (int t : context)
      if (t < 0 || static_cast<std::size_t>(t) >= v)
        throw std::invalid_argument("ngram query: token out of vocabulary");
    std::vector<double> scores = smoothing_ == LmSmoothing::add_k
                                     ? add_k_scores(context)
                                     : backoff_scores(context, std::min<int>(
                                           order_ - 1, static_cast<int>(context.size())));
    std::vector<double> logs(v);
    for (std::size_t i = 0; i < v; ++i) logs[i] = std::log(scores[i]);
    return normalize_logits(logs);
  }

  // Chain-rule sum of stepwise next_logp selections; exact by construction.
  double log_prob(std::span<const int> sequence) const {
    double total = 0.0;
    for (std::size_t i = 0; i < sequence.size(); ++i) {
      LogDistribution d = next_logp(sequence.subspan(0, i));
      const int tok = sequence[i];
      if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_.size())
        throw std::invalid_argument("ngram log_prob: token out of vocabulary");
      total += d.logp[static_cast<std::size_t>(tok)];
    }
    return total;
  }

  double log_prob(const std::vector<int>& sequence) const {
    return log_prob(std::span<const int>(sequence));
  }

  // exp of the mean negative log-likelihood per token (EOS included).
  double perplexity(const std::vector<std::vector<int>>& corpus) const {
    if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& seq : corpus) {
      total += log_prob(std::span<const int>(seq));
      tokens += seq.size();
    }
    if (tokens == 0) throw std::invalid_argument("perplexity: no tokens");
    return std::exp(-total / static_cast<double>(tokens));
  }

  nlohmann::json to_json() const {
    nlohmann::json tables = nlohmann::json::array();
    for (std::size_t m = 0; m < counts_.size(); ++m) {
      for (const auto& [ctx, counts] : counts_[m]) {
        tables.push_back({{"ctx", ctx}, {"counts", counts}});
      }
    }
    return nlohmann::json{{"version", kFormatVersion},
                          {"order", order_},
                          {"smoothing", to_string(smoothing_)},
                          {"k", k_},
                          {"alpha", alpha_},
                          {"vocab", vocab_.to_json()},
                          {"tables", tables}};
  }

  static CharNGramLM from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kFormatVersion)
      throw std::invalid_argument("unsupported LM file version");
    CharNGramLM lm(Vocabulary::from_json(j.at("vocab")), j.at("order").get<int>(),
                   lm_smoothing_from_string(j.at("smoothing").get<std::string>()),
                   j.at("k").get<double>(), j.at("alpha").get<double>());
    for (const auto& entry : j.at("tables")) {
      auto ctx = entry.at("ctx").get<std::vector<int>>();
      auto counts = entry.at("counts").get<std::vector<std::int64_t>>();
      if (ctx.size() >= static_cast<std::size_t>(lm.order_) || counts.size() != lm.vocab_.size())
        throw std::invalid_argument("malformed LM table entry");
      lm.counts_[ctx.size()][ctx] = std::move(counts);
    }
    return lm;
  }

 private:
  CharNGramLM(Vocabulary vocab, int order, LmSmoothing smoothing, double k, double alpha)
      : vocab_(std::move(vocab)), order_(order), smoothing_(smoothing), k_(k), alpha_(alpha) {
    counts_.resize(static_cast<std::size_t>(order_));
  }

  const std::vector<std::int64_t>* find_counts(std::span<const int> ctx) const {
    const auto& table = counts_[ctx.size()];
    auto it = table.find(std::vector<int>(ctx.begin(), ctx.end()));
    return it == table.end() ? nullptr : &it->second;
  }

  // Longest stored context suffix, add-k smoothed.
  std::vector<double> add_k_scores(std::span<const int> context) const {
    const std::size_t v = vocab_.size();
    int m = std::min<int>(order_ - 1, static_cast<int>(context.size()));
    const std::vector<std::int64_t>* counts = nullptr;
    for (; m >= 0; --m) {
      counts = find_counts(context.subspan(context.size() - static_cast<std::size_t>(m)));
      if (counts) break;
    }
    std::vector<double> scores(v, k_);
    if (counts)
      for (std::size_t i = 0; i < v; ++i) scores[i] += static_cast<double>((*counts)[i]);
    return scores;
  }

  // Stupid backoff: relative frequency where seen, alpha-discounted
  // recursion otherwise; the unigram base carries an add-one floor.
  std::vector<double> backoff_scores(std::span<const int> context, int m) const {
    const std::size_t v = vocab_.size();
    if (m == 0) {
      std::vector<double> scores(v, 1.0);
      double total = static_cast<double>(v);
      if (const auto* counts = find_counts({})) {
        for (std::size_t i = 0; i < v; ++i) {
          scores[i] += static_cast<double>((*counts)[i]);
          total += static_cast<double>((*counts)[i]);
        }
      }
      for (double& s : scores) s /= total;
      return scores;
    }
    std::span<const int> ctx = context.subspan(context.size() - static_cast<std::size_t>(m));
    std::vector<double> lower = backoff_scores(context, m - 1);
    const auto* counts = find_counts(ctx);
    if (!counts) {
      for (double& s : lower) s *= alpha_;
      return lower;
    }
    double total = 0.0;
    for (auto c : *counts) total += static_cast<double>(c);
    std::vector<double> scores(v);
    for (std::size_t i = 0; i < v; ++i) {
      scores[i] = (*counts)[i] > 0 ? static_cast<double>((*counts)[i]) / total
                                   : alpha_ * lower[i];
    }
    return scores;
  }

  Vocabulary vocab_;
  int order_;
  LmSmoothing smoothing_;
  double k_;
  double alpha_;
  // counts_[m]: context of length m -> dense per-token counts
  std::vector<std::map<std::vector<int>, std::vector<std::int64_t>>> counts_;
};

}  // namespace seqdec
