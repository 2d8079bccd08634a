#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "seqdec/hypothesis.hpp"
#include "seqdec/ngram_lm.hpp"
#include "seqdec/replay_model.hpp"
#include "seqdec/scorers.hpp"

namespace seqdec {

struct BeamConfig {
  int beam_width = 10;
  int max_length = 200;  // emitted tokens including EOS
  ScoreConfig score;
  const CharNGramLM* lm = nullptr;

  void validate() const {
    if (beam_width < 1) throw std::invalid_argument("beam_width must be >= 1");
    if (max_length < 1) throw std::invalid_argument("max_length must be >= 1");
    score.validate();
    if (score.lm_weight > 0.0 && lm == nullptr)
      throw std::invalid_argument("lm_weight > 0 requires a language model");
  }
};

struct DecodeDiagnostics {
  long expanded = 0;
  long pruned = 0;
  bool max_length_hit = false;
};

struct DecodeResult {
  std::vector<Hypothesis> finished;          // sorted by composite score, best first
  std::vector<double> scores;                // parallel to finished
  std::optional<Hypothesis> best_unfinished;  // set when nothing finished
  DecodeDiagnostics diag;

  bool found_finished() const { return !finished.empty(); }

  const Hypothesis& best() const {
    if (!finished.empty()) return finished.front();
    if (best_unfinished) return *best_unfinished;
    throw std::logic_error("empty decode result");
  }
};

namespace detail {

struct Scored {
  double score;
  Hypothesis hyp;
};

// score descending, lexicographic token order ascending on ties
inline bool better(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.hyp.tokens < b.hyp.tokens;
}

inline Hypothesis extend(const Hypothesis& h, int token, double step_logp,
                         const std::vector<double>& attention, double lm_step_logp,
                         bool finish) {
  Hypothesis child = h;
  child.tokens.push_back(token);
  child.model_logp += step_logp;
  child.lm_logp += lm_step_logp;
  child.trace.append(attention);
  child.finished = finish;
  return child;
}

}  // namespace detail

// Breadth-synchronous beam search with the composite criterion.
// Finished hypotheses leave the beam and compete in the final ranking.
inline DecodeResult beam_search(const PrefixTableModel& model, const BeamConfig& cfg) {
  cfg.validate();
  const int eos = model.vocab().eos_index();
  const std::size_t v = model.vocab().size();
  const ScoreConfig& sc = cfg.score;

  DecodeResult result;
  Hypothesis root;
  root.trace.frame_count = model.frame_count();
  std::vector<detail::Scored> live{{0.0, std::move(root)}};
  std::vector<detail::Scored> finished;

  for (int step = 0; step < cfg.max_length && !live.empty(); ++step) {
    std::vector<detail::Scored> candidates;
    candidates.reserve(live.size() * v);
    for (const auto& s : live) {
      const Hypothesis& h = s.hyp;
      PrefixTableModel::Entry entry = model.step(h.tokens);
      LogDistribution dist = tempered_distribution(entry.logits, sc.temperature);
      std::optional<LogDistribution> lm_dist;
      if (cfg.lm && sc.lm_weight > 0.0) lm_dist = cfg.lm->next_logp(h.tokens);
      const bool allow_eos = !sc.eos_gate_enabled || eos_allowed(dist, sc.eos_margin, eos);
      for (int t = 0; t < static_cast<int>(v); ++t) {
        const bool is_eos = t == eos;
        if (is_eos && !allow_eos) continue;
        const double lm_step = lm_dist ? lm_dist->logp[static_cast<std::size_t>(t)] : 0.0;
        Hypothesis child = detail::extend(h, t, dist.logp[static_cast<std::size_t>(t)],
                                          entry.attention, lm_step, is_eos);
        const double score = composite_score(child, child.lm_logp, sc);
        ++result.diag.expanded;
        if (is_eos)
          finished.push_back({score, std::move(child)});
        else
          candidates.push_back({score, std::move(child)});
      }
    }
    std::sort(candidates.begin(), candidates.end(), detail::better);
    if (candidates.size() > static_cast<std::size_t>(cfg.beam_width)) {
      result.diag.pruned += static_cast<long>(candidates.size()) - cfg.beam_width;
      candidates.resize(static_cast<std::size_t>(cfg.beam_width));
    }
    live = std::move(candidates);
    if (step + 1 == cfg.max_length && !live.empty()) result.diag.max_length_hit = true;
  }

  std::sort(finished.begin(), finished.end(), detail::better);
  for (auto& f : finished) {
    result.scores.push_back(f.score);
    result.finished.push_back(std::move(f.hyp));
  }
  if (result.finished.empty() && !live.empty()) {
    // EOS gate blocked every termination within max_length
    result.best_unfinished = live.front().hyp;
  }
  return result;
}

// Argmax chain; the emitted token sequence is independent of the
// temperature, which only rescales the recorded log-probabilities.
inline Hypothesis greedy_decode(const PrefixTableModel& model, double temperature,
                                int max_length) {
  if (max_length < 1) throw std::invalid_argument("max_length must be >= 1");
  const int eos = model.vocab().eos_index();
  Hypothesis h;
  h.trace.frame_count = model.frame_count();
  while (static_cast<int>(h.tokens.size()) < max_length) {
    PrefixTableModel::Entry entry = model.step(h.tokens);
    LogDistribution dist = tempered_distribution(entry.logits, temperature);
    const int t = dist.argmax();
    h.model_logp += dist.logp[static_cast<std::size_t>(t)];
    h.tokens.push_back(t);
    h.trace.append(entry.attention);
    if (t == eos) {
      h.finished = true;
      break;
    }
  }
  return h;
}

// Brute-force oracle: enumerates every EOS-terminated sequence up to
// max_length and scores it with the identical composite criterion.
inline DecodeResult exhaustive_decode(const PrefixTableModel& model, const BeamConfig& cfg) {
  cfg.validate();
  const std::size_t v = model.vocab().size();
  if (std::pow(static_cast<double>(v), static_cast<double>(cfg.max_length)) > 1e6)
    throw std::invalid_argument("exhaustive_decode: search space exceeds guard (V^max_length > 1e6)");
  const int eos = model.vocab().eos_index();
  const ScoreConfig& sc = cfg.score;

  DecodeResult result;
  std::vector<detail::Scored> finished;

  struct Rec {
    const PrefixTableModel& model;
    const BeamConfig& cfg;
    int eos;
    std::vector<detail::Scored>& finished;
    DecodeDiagnostics& diag;

    void operator()(const Hypothesis& h) {
      const ScoreConfig& sc = cfg.score;
      PrefixTableModel::Entry entry = model.step(h.tokens);
      LogDistribution dist = tempered_distribution(entry.logits, sc.temperature);
      std::optional<LogDistribution> lm_dist;
      if (cfg.lm && sc.lm_weight > 0.0) lm_dist = cfg.lm->next_logp(h.tokens);
      const bool allow_eos = !sc.eos_gate_enabled || eos_allowed(dist, sc.eos_margin, eos);
      for (int t = 0; t < static_cast<int>(model.vocab().size()); ++t) {
        const bool is_eos = t == eos;
        if (is_eos && !allow_eos) continue;
        const double lm_step = lm_dist ? lm_dist->logp[static_cast<std::size_t>(t)] : 0.0;
        Hypothesis child = detail::extend(h, t, dist.logp[static_cast<std::size_t>(t)],
                                          entry.attention, lm_step, is_eos);
        const double score = composite_score(child, child.lm_logp, sc);
        ++diag.expanded;
        if (is_eos) {
          finished.push_back({score, std::move(child)});
        } else if (static_cast<int>(child.tokens.size()) < cfg.max_length) {
          (*this)(child);
        }
      }
    }
  };

  Hypothesis root;
  root.trace.frame_count = model.frame_count();
  Rec rec{model, cfg, eos, finished, result.diag};
  rec(root);

  std::sort(finished.begin(), finished.end(), detail::better);
  for (auto& f : finished) {
    result.scores.push_back(f.score);
    result.finished.push_back(std::move(f.hyp));
  }
  return result;
}

}  // namespace seqdec
