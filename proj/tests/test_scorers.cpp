#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "seqdec/rng.hpp"
#include "seqdec/scorers.hpp"

using namespace seqdec;

TEST_CASE("tempered distribution examples") {
  auto d = tempered_distribution(std::vector<double>{2.0, 0.0}, 1.0);
  CHECK_THAT(d.prob(0), Catch::Matchers::WithinAbs(0.8808, 1e-4));

  d = tempered_distribution(std::vector<double>{2.0, 0.0}, 2.0);
  CHECK_THAT(d.prob(0), Catch::Matchers::WithinAbs(0.7311, 1e-4));
  CHECK_THAT(d.prob(1), Catch::Matchers::WithinAbs(0.2689, 1e-4));

  d = tempered_distribution(std::vector<double>{2.0, 0.0}, 1000.0);
  CHECK_THAT(d.prob(0), Catch::Matchers::WithinAbs(0.5, 1e-3));

  CHECK_THROWS(tempered_distribution(std::vector<double>{1.0, 0.0}, 0.0));
  CHECK_THROWS(tempered_distribution(std::vector<double>{1.0, 0.0}, -1.0));
}

TEST_CASE("temperature preserves the argmax and raises entropy") {
  SplitMix64 rng(5);
  const double temps[] = {0.5, 1.0, 1.3, 2.0, 4.0};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(15);
    std::vector<double> logits(n);
    for (auto& l : logits) l = rng.uniform(-8.0, 8.0);
    const int ref_argmax = tempered_distribution(logits, 1.0).argmax();
    double prev_entropy = -1.0;
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      auto d = tempered_distribution(logits, t);
      CHECK(d.argmax() == ref_argmax);
      const double h = entropy(d);
      CHECK(h > prev_entropy);
      prev_entropy = h;
    }
    for (double t : temps) CHECK(tempered_distribution(logits, t).argmax() == ref_argmax);
  }
}

TEST_CASE("coverage counts thresholded column sums") {
  AttentionTrace empty;
  empty.frame_count = 4;
  CHECK(coverage(empty, 0.5) == 0);

  AttentionTrace trace;
  trace.frame_count = 3;
  trace.append({0.6, 0.0, 0.4});
  trace.append({0.0, 0.4, 0.6});
  // column sums 0.6, 0.4, 1.0
  CHECK(coverage(trace, 0.5) == 2);
}

TEST_CASE("repeat selection of a frame counts once") {
  AttentionTrace trace;
  trace.frame_count = 2;
  trace.append({1.0, 0.0});
  trace.append({1.0, 0.0});
  CHECK(coverage(trace, 0.5) == 1);
}

TEST_CASE("coverage is monotone in appended rows and bounded by frames") {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t frames = 2 + rng.below(6);
    AttentionTrace trace;
    trace.frame_count = frames;
    int prev = 0;
    for (int row = 0; row < 10; ++row) {
      std::vector<double> r(frames);
      double sum = 0.0;
      for (auto& w : r) {
        w = rng.uniform(0.0, 1.0);
        sum += w;
      }
      for (auto& w : r) w /= sum;
      trace.append(r);
      const int c = coverage(trace, 0.5);
      CHECK(c >= prev);
      CHECK(c <= static_cast<int>(frames));
      prev = c;
    }
  }
}

TEST_CASE("attention rows are validated") {
  AttentionTrace trace;
  trace.frame_count = 2;
  CHECK_THROWS(trace.append({0.5, 0.5, 0.0}));
  CHECK_THROWS(trace.append({1.5, -0.5}));
  CHECK_THROWS(trace.append({0.2, 0.2}));
  trace.append({0.5, 0.5});
  trace.rows.push_back({0.5});  // bypass validation to get a ragged trace
  CHECK_THROWS(coverage(trace, 0.5));
}

TEST_CASE("eos gate") {
  LogDistribution d = normalize_logits(std::vector<double>{0.0, -1.5});
  const int eos = 1;
  CHECK(eos_allowed(d, 1.0, 0));  // EOS is the argmax
  CHECK_FALSE(eos_allowed(d, 1.0, eos));  // gap 1.5 > delta 1.0
  CHECK(eos_allowed(d, 2.0, eos));
  CHECK(eos_allowed(d, std::numeric_limits<double>::infinity(), eos));
}

namespace {

Hypothesis table1_hyp(double model_logp) {
  Hypothesis h;
  h.model_logp = model_logp;
  h.finished = true;
  return h;
}

}  // namespace

TEST_CASE("composite score degenerate config equals model score") {
  ScoreConfig cfg;
  Hypothesis h = table1_hyp(-12.25);
  h.tokens = {0, 1, 2};
  CHECK(composite_score(h, -99.0, cfg) == -12.25);
}

TEST_CASE("validation-utterance fixture: LM fusion prefers the empty transcript") {
  ScoreConfig cfg;
  cfg.lm_weight = 0.5;

  struct Row {
    double lm, model;
  };
  // (LM cost, model cost) for the five transcripts; first is ground truth,
  // last is empty
  const Row rows[] = {{-108.5, -34.5}, {-64.6, -19.9}, {-40.6, -31.2}, {-37.8, -20.3},
                      {-3.5, -12.5}};
  std::vector<double> scores;
  for (const Row& r : rows) {
    Hypothesis h = table1_hyp(r.model);
    scores.push_back(composite_score(h, r.lm, cfg));
  }
  CHECK_THAT(scores[0], Catch::Matchers::WithinAbs(-88.75, 1e-9));
  CHECK_THAT(scores[4], Catch::Matchers::WithinAbs(-14.25, 1e-9));
  // ground truth ranks last, empty transcript first
  for (std::size_t i = 1; i < 5; ++i) CHECK(scores[i] > scores[0]);
  for (std::size_t i = 0; i < 4; ++i) CHECK(scores[4] > scores[i]);
}

TEST_CASE("composite score populates the breakdown") {
  ScoreConfig cfg;
  cfg.lm_weight = 0.5;
  cfg.coverage_weight = 1.5;
  cfg.coverage_threshold = 0.5;
  cfg.length_bonus = 0.25;

  Hypothesis h;
  h.model_logp = -3.0;
  h.tokens = {0, 1};
  h.trace.frame_count = 2;
  h.trace.append({1.0, 0.0});
  h.trace.append({0.0, 1.0});

  const double score = composite_score(h, -4.0, cfg);
  CHECK_THAT(h.breakdown.model, Catch::Matchers::WithinAbs(-3.0, 1e-12));
  CHECK_THAT(h.breakdown.lm, Catch::Matchers::WithinAbs(-2.0, 1e-12));
  CHECK_THAT(h.breakdown.coverage, Catch::Matchers::WithinAbs(3.0, 1e-12));
  CHECK_THAT(h.breakdown.length, Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(score, Catch::Matchers::WithinAbs(-1.5, 1e-12));
  CHECK_THAT(h.breakdown.total(), Catch::Matchers::WithinAbs(score, 1e-12));
}

TEST_CASE("with all weights zero, composite ranking is model ranking") {
  SplitMix64 rng(17);
  ScoreConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    Hypothesis a = table1_hyp(rng.uniform(-50.0, 0.0));
    Hypothesis b = table1_hyp(rng.uniform(-50.0, 0.0));
    const double sa = composite_score(a, rng.uniform(-50.0, 0.0), cfg);
    const double sb = composite_score(b, rng.uniform(-50.0, 0.0), cfg);
    CHECK((sa > sb) == (a.model_logp > b.model_logp));
  }
}

TEST_CASE("score config validation") {
  ScoreConfig cfg;
  cfg.temperature = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.temperature = 1.0;
  cfg.coverage_threshold = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg.coverage_threshold = 0.5;
  cfg.lm_weight = -0.1;
  CHECK_THROWS(cfg.validate());
}
